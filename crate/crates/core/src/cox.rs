//! Cox calibrating functions and the default calibrator grid.
//!
//! A calibrator `(alpha, beta)` maps a probability vector `p` to the vector
//! whose class-`y` entry is proportional to `p_y^beta * exp(alpha(y))`. The
//! family is closed under shifting `alpha` by a constant, so parameters are
//! kept in a canonical form with `min(alpha) = 0`.

use crate::prob::ProbVector;
use thiserror::Error;

/// Exponents of the default grid; 1 is the neutral value, 0.5 flattens
/// overconfident predictions, 2 sharpens under-confident ones.
pub const DEFAULT_BETAS: [f64; 3] = [1.0, 0.5, 2.0];

/// Offset magnitudes of the default grid: one-hot offsets `±1·e_k`.
pub const DEFAULT_ALPHA_MAGNITUDES: [f64; 1] = [1.0];

/// Entrywise tolerance under which two canonicalized calibrators are
/// considered the same grid member.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoxError {
    #[error("calibrator grid needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("beta must be a positive finite value, got {0}")]
    InvalidBeta(f64),
    #[error("alpha entry {index} is not finite: {value}")]
    InvalidAlpha { index: usize, value: f64 },
    #[error("beta values must include the neutral value 1")]
    MissingNeutralBeta,
    #[error("grid must contain the neutral calibrator at index 0")]
    MissingNeutralElement,
    #[error("grid members disagree on class count: {0} vs {1}")]
    ClassCountMismatch(usize, usize),
    #[error("grid contains duplicate members after canonicalization")]
    DuplicateMember,
}

/// One Cox calibrator: per-class offsets `alpha` and exponent `beta`,
/// stored in canonical form (`min(alpha) = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaParams {
    alpha: Vec<f64>,
    beta: f64,
}

impl ThetaParams {
    /// Canonicalizes on construction by shifting `alpha` so its minimum is 0.
    pub fn new(alpha: Vec<f64>, beta: f64) -> Result<Self, CoxError> {
        if alpha.len() < 2 {
            return Err(CoxError::TooFewClasses(alpha.len()));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(CoxError::InvalidBeta(beta));
        }
        for (index, &value) in alpha.iter().enumerate() {
            if !value.is_finite() {
                return Err(CoxError::InvalidAlpha { index, value });
            }
        }
        let min = alpha.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut alpha = alpha;
        if min != 0.0 {
            for a in &mut alpha {
                *a -= min;
            }
        }
        Ok(Self { alpha, beta })
    }

    /// The neutral calibrator (`beta = 1`, all-zero `alpha`): the identity map.
    pub fn neutral(k: usize) -> Self {
        assert!(k >= 2);
        Self {
            alpha: vec![0.0; k],
            beta: 1.0,
        }
    }

    pub fn is_neutral(&self) -> bool {
        (self.beta - 1.0).abs() <= DEDUP_TOL && self.alpha.iter().all(|&a| a.abs() <= DEDUP_TOL)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Number of classes this calibrator applies to.
    pub fn class_count(&self) -> usize {
        self.alpha.len()
    }

    fn approx_eq(&self, other: &Self) -> bool {
        (self.beta - other.beta).abs() <= DEDUP_TOL
            && self
                .alpha
                .iter()
                .zip(&other.alpha)
                .all(|(a, b)| (a - b).abs() <= DEDUP_TOL)
    }
}

impl std::fmt::Display for ThetaParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "beta={} alpha=[", self.beta)?;
        for (i, a) in self.alpha.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "]")
    }
}

/// Applies one Cox calibrator to a prediction.
///
/// Zero entries of `p` stay zero (`0^beta = 0` for `beta > 0`); every other
/// entry maps to something strictly positive.
pub fn cox_apply(p: &ProbVector, theta: &ThetaParams) -> ProbVector {
    assert_eq!(
        p.len(),
        theta.class_count(),
        "prediction and calibrator class counts differ"
    );
    let mut numer: Vec<f64> = p
        .as_slice()
        .iter()
        .zip(theta.alpha())
        .map(|(&py, &ay)| {
            if py == 0.0 {
                0.0
            } else {
                py.powf(theta.beta) * ay.exp()
            }
        })
        .collect();
    let denom: f64 = numer.iter().sum();
    // Some entry of p is at least 1/K, so the denominator cannot vanish for
    // finite canonical parameters.
    assert!(
        denom.is_finite() && denom > 0.0,
        "degenerate calibrator output (denominator {denom})"
    );
    for n in &mut numer {
        *n /= denom;
    }
    ProbVector::from_normalized(numer)
}

/// An ordered set of distinct calibrators with the neutral element first.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    thetas: Vec<ThetaParams>,
    k: usize,
}

impl ThetaGrid {
    /// Builds the default grid for `k` classes: `beta` in `{1, 0.5, 2}`
    /// crossed with the all-zero offset and the one-hot offsets `±e_j`.
    pub fn build_default(k: usize) -> Result<Self, CoxError> {
        Self::build(k, &DEFAULT_BETAS, &DEFAULT_ALPHA_MAGNITUDES)
    }

    /// Builds the grid `{(beta, alpha)}` over the given exponents and the
    /// one-hot offset magnitudes, canonicalized and deduplicated, neutral
    /// element first.
    pub fn build(k: usize, betas: &[f64], alpha_magnitudes: &[f64]) -> Result<Self, CoxError> {
        if k < 2 {
            return Err(CoxError::TooFewClasses(k));
        }
        if !betas.iter().any(|&b| (b - 1.0).abs() <= DEDUP_TOL) {
            return Err(CoxError::MissingNeutralBeta);
        }
        let mut thetas = vec![ThetaParams::neutral(k)];
        for &beta in betas {
            let mut candidates = vec![vec![0.0; k]];
            for &m in alpha_magnitudes {
                for sign in [1.0, -1.0] {
                    for class in 0..k {
                        let mut alpha = vec![0.0; k];
                        alpha[class] = sign * m;
                        candidates.push(alpha);
                    }
                }
            }
            for alpha in candidates {
                let theta = ThetaParams::new(alpha, beta)?;
                if !thetas.iter().any(|t| t.approx_eq(&theta)) {
                    thetas.push(theta);
                }
            }
        }
        Ok(Self { thetas, k })
    }

    /// Grid holding only the neutral calibrator; protection degenerates to
    /// the base prediction.
    pub fn neutral_only(k: usize) -> Self {
        assert!(k >= 2);
        Self {
            thetas: vec![ThetaParams::neutral(k)],
            k,
        }
    }

    /// Builds a grid from explicit members, enforcing the invariants:
    /// neutral first, consistent class count, no duplicates.
    pub fn from_thetas(thetas: Vec<ThetaParams>) -> Result<Self, CoxError> {
        let first = thetas.first().ok_or(CoxError::MissingNeutralElement)?;
        if !first.is_neutral() {
            return Err(CoxError::MissingNeutralElement);
        }
        let k = first.class_count();
        for theta in &thetas {
            if theta.class_count() != k {
                return Err(CoxError::ClassCountMismatch(k, theta.class_count()));
            }
        }
        for (i, a) in thetas.iter().enumerate() {
            if thetas[i + 1..].iter().any(|b| a.approx_eq(b)) {
                return Err(CoxError::DuplicateMember);
            }
        }
        Ok(Self { thetas, k })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Number of classes `K`.
    pub fn class_count(&self) -> usize {
        self.k
    }

    pub fn get(&self, index: usize) -> &ThetaParams {
        &self.thetas[index]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ThetaParams> {
        self.thetas.iter()
    }
}
