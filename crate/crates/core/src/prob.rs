//! Probability vectors and labeled prediction streams.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest deviation of the entry sum from 1 that construction repairs by
/// renormalizing; anything further off is rejected.
pub const SUM_ACCEPT_TOL: f64 = 1e-6;

/// Deviation of the entry sum from 1 guaranteed after construction.
pub const SUM_INVARIANT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("probability vector needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("entry {index} is {value}, expected a finite value in [0, 1]")]
    InvalidEntry { index: usize, value: f64 },
    #[error("entries sum to {0}, further than {SUM_ACCEPT_TOL} from 1")]
    NotNormalized(f64),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
}

/// A point on the probability simplex over `K >= 2` classes.
///
/// Construction accepts vectors whose entries sum to 1 within
/// [`SUM_ACCEPT_TOL`] and renormalizes them, so downstream code can rely on
/// the sum being 1 within [`SUM_INVARIANT_TOL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector {
    entries: Vec<f64>,
}

impl ProbVector {
    pub fn new(entries: Vec<f64>) -> Result<Self, ProbError> {
        if entries.len() < 2 {
            return Err(ProbError::TooFewClasses(entries.len()));
        }
        for (index, &value) in entries.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ProbError::InvalidEntry { index, value });
            }
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SUM_ACCEPT_TOL {
            return Err(ProbError::NotNormalized(sum));
        }
        let mut entries = entries;
        if sum != 1.0 {
            for e in &mut entries {
                *e /= sum;
            }
        }
        Ok(Self { entries })
    }

    /// Uniform distribution over `k` classes.
    pub fn uniform(k: usize) -> Self {
        assert!(k >= 2, "need at least 2 classes");
        Self {
            entries: vec![1.0 / k as f64; k],
        }
    }

    /// Builds from entries already known to lie on the simplex.
    ///
    /// Used on internal arithmetic paths (mixtures of valid vectors) where a
    /// full re-validation would only re-derive what the algebra guarantees.
    pub(crate) fn from_normalized(entries: Vec<f64>) -> Self {
        debug_assert!(entries.len() >= 2);
        debug_assert!(entries.iter().all(|e| e.is_finite() && *e >= 0.0));
        debug_assert!((entries.iter().sum::<f64>() - 1.0).abs() <= SUM_INVARIANT_TOL);
        Self { entries }
    }

    /// Number of classes `K`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Probability assigned to `class`.
    pub fn prob(&self, class: usize) -> f64 {
        self.entries[class]
    }

    /// Index of the largest entry; ties break to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.entries.iter().enumerate().skip(1) {
            if v > self.entries[best] {
                best = i;
            }
        }
        best
    }

    /// Clamps every entry into `[eps, 1 - eps]` and renormalizes. Vectors
    /// already inside the bounds pass through unchanged.
    pub fn clamped(&self, eps: f64) -> Self {
        assert!(eps > 0.0 && eps < 0.5, "clamp epsilon must be in (0, 0.5)");
        if self.entries.iter().all(|&e| (eps..=1.0 - eps).contains(&e)) {
            return self.clone();
        }
        let mut entries: Vec<f64> = self
            .entries
            .iter()
            .map(|&e| e.clamp(eps, 1.0 - eps))
            .collect();
        let sum: f64 = entries.iter().sum();
        for e in &mut entries {
            *e /= sum;
        }
        Self { entries }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.entries[index]
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = ProbError;

    fn try_from(entries: Vec<f64>) -> Result<Self, ProbError> {
        Self::new(entries)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Vec<f64> {
        p.entries
    }
}

/// One record of a prediction stream: a base prediction and the label later
/// observed for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub p: ProbVector,
    pub y: usize,
}

impl LabeledExample {
    pub fn new(p: ProbVector, y: usize) -> Result<Self, ProbError> {
        if y >= p.len() {
            return Err(ProbError::LabelOutOfRange {
                label: y,
                classes: p.len(),
            });
        }
        Ok(Self { p, y })
    }
}
