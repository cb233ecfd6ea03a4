//! Built-in classifiers for the shift experiments: multinomial logistic
//! regression trained by full-batch gradient descent, and Gaussian naive
//! Bayes. Both are deterministic in their training data.

use super::{Dataset, ShiftError};
use crate::prob::ProbVector;
use serde::{Deserialize, Serialize};

const LOGISTIC_EPOCHS: usize = 500;
const LOGISTIC_LEARNING_RATE: f64 = 0.1;
const LOGISTIC_L2: f64 = 1e-4;
const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LogisticRegression,
    GaussianNaiveBayes,
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "logistic" | "logistic_regression" => Ok(Self::LogisticRegression),
            "gnb" | "gaussian_naive_bayes" => Ok(Self::GaussianNaiveBayes),
            other => Err(format!(
                "unknown model '{other}' (expected logistic or gnb)"
            )),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::LogisticRegression => write!(f, "logistic"),
            Self::GaussianNaiveBayes => write!(f, "gnb"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticModel {
    k: usize,
    /// Per-feature standardization from the training data.
    means: Vec<f64>,
    stds: Vec<f64>,
    /// Row-major K x (d + 1) weights, bias last.
    weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GnbModel {
    k: usize,
    log_priors: Vec<f64>,
    /// Per class, per feature.
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum SimpleModel {
    Logistic(LogisticModel),
    Gnb(GnbModel),
}

/// Fits the requested model on the training set.
pub fn fit_simple(kind: ModelKind, train: &Dataset) -> Result<SimpleModel, ShiftError> {
    if train.is_empty() {
        return Err(ShiftError::SingleClassTrainingData);
    }
    let mut seen = vec![false; train.k];
    for &y in &train.y {
        seen[y] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(ShiftError::SingleClassTrainingData);
    }
    Ok(match kind {
        ModelKind::LogisticRegression => SimpleModel::Logistic(fit_logistic(train)),
        ModelKind::GaussianNaiveBayes => SimpleModel::Gnb(fit_gnb(train)),
    })
}

fn fit_logistic(train: &Dataset) -> LogisticModel {
    let n = train.len();
    let d = train.x[0].len();
    let k = train.k;

    let mut means = vec![0.0; d];
    for row in &train.x {
        for (m, &v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; d];
    for row in &train.x {
        for ((s, &m), &v) in stds.iter_mut().zip(&means).zip(row) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut stds {
        *s = (*s / n as f64).sqrt().max(1e-9);
    }

    let standardized: Vec<Vec<f64>> = train
        .x
        .iter()
        .map(|row| {
            row.iter()
                .zip(means.iter().zip(&stds))
                .map(|(&v, (&m, &s))| (v - m) / s)
                .collect()
        })
        .collect();

    let width = d + 1;
    let mut weights = vec![0.0; k * width];
    let mut grad = vec![0.0; k * width];
    let mut logits = vec![0.0; k];
    for _ in 0..LOGISTIC_EPOCHS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (row, &label) in standardized.iter().zip(&train.y) {
            for (class, logit) in logits.iter_mut().enumerate() {
                let w = &weights[class * width..(class + 1) * width];
                *logit = w[d] + row.iter().zip(w).map(|(&x, &wi)| x * wi).sum::<f64>();
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut probs: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
            let sum: f64 = probs.iter().sum();
            for p in &mut probs {
                *p /= sum;
            }
            for (class, &p) in probs.iter().enumerate() {
                let r = p - if class == label { 1.0 } else { 0.0 };
                let g = &mut grad[class * width..(class + 1) * width];
                for (gi, &x) in g[..d].iter_mut().zip(row) {
                    *gi += r * x;
                }
                g[d] += r;
            }
        }
        let scale = 1.0 / n as f64;
        for class in 0..k {
            for j in 0..width {
                let idx = class * width + j;
                let mut g = grad[idx] * scale;
                if j < d {
                    g += LOGISTIC_L2 * weights[idx];
                }
                weights[idx] -= LOGISTIC_LEARNING_RATE * g;
            }
        }
    }
    LogisticModel {
        k,
        means,
        stds,
        weights,
    }
}

fn fit_gnb(train: &Dataset) -> GnbModel {
    let n = train.len();
    let d = train.x[0].len();
    let k = train.k;
    let mut counts = vec![0usize; k];
    let mut means = vec![vec![0.0; d]; k];
    for (row, &y) in train.x.iter().zip(&train.y) {
        counts[y] += 1;
        for (m, &v) in means[y].iter_mut().zip(row) {
            *m += v;
        }
    }
    for (mean_row, &count) in means.iter_mut().zip(&counts) {
        if count > 0 {
            for m in mean_row {
                *m /= count as f64;
            }
        }
    }
    let mut variances = vec![vec![0.0; d]; k];
    for (row, &y) in train.x.iter().zip(&train.y) {
        for ((v, &m), &x) in variances[y].iter_mut().zip(&means[y]).zip(row) {
            *v += (x - m) * (x - m);
        }
    }
    for (var_row, &count) in variances.iter_mut().zip(&counts) {
        for v in var_row {
            if count > 0 {
                *v = (*v / count as f64).max(VARIANCE_FLOOR);
            } else {
                *v = 1.0;
            }
        }
    }
    // Laplace-smoothed priors keep unseen classes representable.
    let log_priors: Vec<f64> = counts
        .iter()
        .map(|&c| ((c + 1) as f64 / (n + k) as f64).ln())
        .collect();
    GnbModel {
        k,
        log_priors,
        means,
        variances,
    }
}

impl SimpleModel {
    /// Predicted class distribution for one feature row.
    pub fn predict_proba(&self, row: &[f64]) -> ProbVector {
        match self {
            SimpleModel::Logistic(m) => {
                let d = m.means.len();
                assert_eq!(row.len(), d, "feature count mismatch");
                let std_row: Vec<f64> = row
                    .iter()
                    .zip(m.means.iter().zip(&m.stds))
                    .map(|(&v, (&mean, &std))| (v - mean) / std)
                    .collect();
                let width = d + 1;
                let logits: Vec<f64> = (0..m.k)
                    .map(|class| {
                        let w = &m.weights[class * width..(class + 1) * width];
                        w[d] + std_row.iter().zip(w).map(|(&x, &wi)| x * wi).sum::<f64>()
                    })
                    .collect();
                softmax(&logits)
            }
            SimpleModel::Gnb(m) => {
                let logits: Vec<f64> = (0..m.k)
                    .map(|class| {
                        let mut score = m.log_priors[class];
                        for ((&x, &mean), &var) in
                            row.iter().zip(&m.means[class]).zip(&m.variances[class])
                        {
                            score += -0.5 * ((2.0 * std::f64::consts::PI * var).ln()
                                + (x - mean) * (x - mean) / var);
                        }
                        score
                    })
                    .collect();
                softmax(&logits)
            }
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            SimpleModel::Logistic(m) => m.k,
            SimpleModel::Gnb(m) => m.k,
        }
    }
}

fn softmax(logits: &[f64]) -> ProbVector {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for o in &mut out {
        *o /= sum;
    }
    ProbVector::from_normalized(out)
}
