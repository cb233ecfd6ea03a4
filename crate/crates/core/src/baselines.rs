//! Classical post-hoc calibration baselines: Platt scaling, temperature
//! scaling and isotonic regression, plus a one-vs-rest wrapper that lifts the
//! binary fits to probability vectors.

use crate::prob::ProbVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probabilities are clamped into `[CLAMP_EPS, 1 - CLAMP_EPS]` before any
/// logarithm and on calibrator outputs, keeping log losses finite.
pub const CLAMP_EPS: f64 = 1e-6;

/// Search interval for the temperature parameter.
pub const TEMPERATURE_RANGE: (f64, f64) = (0.05, 20.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("fitting requires at least {needed} examples, got {got}")]
    TooFewExamples { needed: usize, got: usize },
    #[error("scores and labels have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("value at index {0} is not finite")]
    NonFinite(usize),
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

// ---------------------------------------------------------------------------
// Platt scaling
// ---------------------------------------------------------------------------

/// Logistic calibrator `score -> sigmoid(a * score + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlattModel {
    pub a: f64,
    pub b: f64,
    /// Set when the training data contained a single class; the model then
    /// predicts the clamped class rate regardless of score.
    pub degenerate: bool,
}

impl PlattModel {
    /// Fits `(a, b)` by minimizing the mean log loss of `sigmoid(a*s + b)`
    /// with damped Newton steps, to gradient norm `1e-8` or 1000 iterations.
    pub fn fit(scores: &[f64], labels: &[bool]) -> Result<Self, FitError> {
        if scores.len() != labels.len() {
            return Err(FitError::LengthMismatch(scores.len(), labels.len()));
        }
        if scores.len() < 2 {
            return Err(FitError::TooFewExamples {
                needed: 2,
                got: scores.len(),
            });
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(FitError::NonFinite(i));
        }
        let n = scores.len() as f64;
        let positives = labels.iter().filter(|&&y| y).count();
        if positives == 0 || positives == labels.len() {
            let rate = (positives as f64 / n).clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
            return Ok(Self {
                a: 0.0,
                b: logit(rate),
                degenerate: true,
            });
        }

        let loss = |a: f64, b: f64| -> f64 {
            scores
                .iter()
                .zip(labels)
                .map(|(&s, &y)| {
                    let p = sigmoid(a * s + b).clamp(1e-15, 1.0 - 1e-15);
                    if y {
                        -p.ln()
                    } else {
                        -(1.0 - p).ln()
                    }
                })
                .sum::<f64>()
                / n
        };

        let (mut a, mut b) = (0.0f64, 0.0f64);
        let mut current = loss(a, b);
        for _ in 0..1000 {
            let mut ga = 0.0;
            let mut gb = 0.0;
            let mut haa = 0.0;
            let mut hab = 0.0;
            let mut hbb = 0.0;
            for (&s, &y) in scores.iter().zip(labels) {
                let p = sigmoid(a * s + b);
                let r = p - f64::from(y);
                let w = p * (1.0 - p);
                ga += r * s;
                gb += r;
                haa += w * s * s;
                hab += w * s;
                hbb += w;
            }
            ga /= n;
            gb /= n;
            haa = haa / n + 1e-12;
            hab /= n;
            hbb = hbb / n + 1e-12;
            if ga.abs().max(gb.abs()) <= 1e-8 {
                break;
            }
            let det = haa * hbb - hab * hab;
            let (da, db) = if det.abs() > 1e-300 {
                ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
            } else {
                (ga, gb)
            };
            // Backtracking keeps the step a descent step even when the
            // problem is separable and the optimum sits at infinity.
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand = loss(a - step * da, b - step * db);
                if cand <= current {
                    a -= step * da;
                    b -= step * db;
                    current = cand;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok(Self {
            a,
            b,
            degenerate: false,
        })
    }

    /// Calibrated probability for one score, clamped away from 0 and 1.
    pub fn predict(&self, score: f64) -> f64 {
        sigmoid(self.a * score + self.b).clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
    }
}

// ---------------------------------------------------------------------------
// Temperature scaling
// ---------------------------------------------------------------------------

/// Single-parameter calibrator dividing log probabilities by `T` before a
/// softmax; `T = 1` is the identity up to renormalization of the clamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureModel {
    pub t: f64,
    /// Set when the optimum landed on the search boundary.
    pub boundary: bool,
}

impl TemperatureModel {
    /// Fits `T` by golden-section search on the mean log loss over
    /// `[0.05, 20]`. The objective is convex in `1/T`, hence unimodal in `T`.
    pub fn fit(predictions: &[ProbVector], labels: &[usize]) -> Result<Self, FitError> {
        if predictions.len() != labels.len() {
            return Err(FitError::LengthMismatch(predictions.len(), labels.len()));
        }
        if predictions.is_empty() {
            return Err(FitError::TooFewExamples {
                needed: 1,
                got: 0,
            });
        }
        for (p, &y) in predictions.iter().zip(labels) {
            if y >= p.len() {
                return Err(FitError::LabelOutOfRange {
                    label: y,
                    classes: p.len(),
                });
            }
        }
        let log_probs: Vec<Vec<f64>> = predictions
            .iter()
            .map(|p| p.clamped(CLAMP_EPS).as_slice().iter().map(|v| v.ln()).collect())
            .collect();
        let objective = |t: f64| -> f64 {
            let mut total = 0.0;
            for (lp, &y) in log_probs.iter().zip(labels) {
                let max = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / t;
                let lse: f64 = lp.iter().map(|&v| (v / t - max).exp()).sum::<f64>().ln() + max;
                total += lse - lp[y] / t;
            }
            total / log_probs.len() as f64
        };

        let (mut lo, mut hi) = TEMPERATURE_RANGE;
        let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let mut f1 = objective(x1);
        let mut f2 = objective(x2);
        while hi - lo > 1e-6 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = objective(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = objective(x2);
            }
        }
        let t = 0.5 * (lo + hi);
        let boundary =
            t - TEMPERATURE_RANGE.0 <= 1e-4 || TEMPERATURE_RANGE.1 - t <= 1e-4;
        Ok(Self { t, boundary })
    }

    /// Rescales one prediction; preserves the argmax exactly.
    pub fn apply(&self, p: &ProbVector) -> ProbVector {
        let lp: Vec<f64> = p
            .clamped(CLAMP_EPS)
            .as_slice()
            .iter()
            .map(|v| v.ln() / self.t)
            .collect();
        let max = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = lp.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = out.iter().sum();
        for o in &mut out {
            *o /= sum;
        }
        ProbVector::from_normalized(out)
    }
}

// ---------------------------------------------------------------------------
// Isotonic regression
// ---------------------------------------------------------------------------

/// Stepwise-constant nondecreasing calibrator fit by pool-adjacent-violators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicModel {
    /// Strictly increasing score thresholds (the distinct training scores).
    pub breakpoints: Vec<f64>,
    /// Nondecreasing fitted values, one per breakpoint.
    pub values: Vec<f64>,
}

impl IsotonicModel {
    /// Least-squares optimal nondecreasing fit of `targets` against `scores`.
    /// Tied scores are pooled into one weighted point before the sweep.
    pub fn fit(scores: &[f64], targets: &[f64]) -> Result<Self, FitError> {
        if scores.len() != targets.len() {
            return Err(FitError::LengthMismatch(scores.len(), targets.len()));
        }
        if scores.is_empty() {
            return Err(FitError::TooFewExamples { needed: 1, got: 0 });
        }
        if let Some(i) = scores
            .iter()
            .chain(targets)
            .position(|v| !v.is_finite())
        {
            return Err(FitError::NonFinite(i % scores.len()));
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap());

        // Collapse tied scores to weighted means.
        let mut points: Vec<(f64, f64, f64)> = Vec::new(); // (score, mean, weight)
        for &i in &order {
            match points.last_mut() {
                Some((s, mean, w)) if *s == scores[i] => {
                    *mean += (targets[i] - *mean) / (*w + 1.0);
                    *w += 1.0;
                }
                _ => points.push((scores[i], targets[i], 1.0)),
            }
        }

        // Pool-adjacent-violators sweep over (value, weight) blocks.
        let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(points.len()); // (value, weight, span)
        for &(_, mean, weight) in &points {
            blocks.push((mean, weight, 1));
            while blocks.len() >= 2 {
                let last = blocks.len() - 1;
                if blocks[last - 1].0 <= blocks[last].0 {
                    break;
                }
                let (v2, w2, s2) = blocks.pop().unwrap();
                let (v1, w1, s1) = blocks.pop().unwrap();
                blocks.push(((v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, s1 + s2));
            }
        }

        let breakpoints: Vec<f64> = points.iter().map(|&(s, _, _)| s).collect();
        let mut values = Vec::with_capacity(points.len());
        for &(value, _, span) in &blocks {
            values.extend(std::iter::repeat_n(value, span));
        }
        Ok(Self { breakpoints, values })
    }

    /// Stepwise-constant prediction with flat extension beyond the data
    /// range, clamped away from 0 and 1 for log-loss use.
    pub fn predict(&self, score: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= score);
        let raw = if idx == 0 {
            self.values[0]
        } else {
            self.values[idx - 1]
        };
        raw.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
    }
}

// ---------------------------------------------------------------------------
// Probability-vector calibrators
// ---------------------------------------------------------------------------

/// Which classical baseline to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibratorKind {
    Platt,
    Temperature,
    Isotonic,
}

impl std::str::FromStr for CalibratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "platt" => Ok(Self::Platt),
            "temperature" => Ok(Self::Temperature),
            "isotonic" => Ok(Self::Isotonic),
            other => Err(format!(
                "unknown calibrator '{other}' (expected platt, temperature or isotonic)"
            )),
        }
    }
}

impl std::fmt::Display for CalibratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Platt => write!(f, "platt"),
            Self::Temperature => write!(f, "temperature"),
            Self::Isotonic => write!(f, "isotonic"),
        }
    }
}

enum CalibratorInner {
    /// Binary: a single model on the class-1 probability.
    PlattBinary(PlattModel),
    /// Multiclass: one-vs-rest models on per-class logits, renormalized.
    PlattOvr(Vec<PlattModel>),
    Temperature(TemperatureModel),
    IsotonicBinary(IsotonicModel),
    IsotonicOvr(Vec<IsotonicModel>),
}

/// A fitted baseline lifted to act on probability vectors.
pub struct ProbCalibrator {
    kind: CalibratorKind,
    k: usize,
    inner: CalibratorInner,
}

/// Fits the requested baseline on a calibration set of base predictions and
/// labels. Platt and isotonic are binary models; for `K > 2` they are fit
/// one-vs-rest and renormalized at application time.
pub fn fit_calibrator(
    kind: CalibratorKind,
    predictions: &[ProbVector],
    labels: &[usize],
) -> Result<ProbCalibrator, FitError> {
    if predictions.len() != labels.len() {
        return Err(FitError::LengthMismatch(predictions.len(), labels.len()));
    }
    let first = predictions.first().ok_or(FitError::TooFewExamples {
        needed: 2,
        got: 0,
    })?;
    let k = first.len();
    for (p, &y) in predictions.iter().zip(labels) {
        if y >= p.len() {
            return Err(FitError::LabelOutOfRange {
                label: y,
                classes: p.len(),
            });
        }
    }
    let inner = match kind {
        CalibratorKind::Temperature => {
            CalibratorInner::Temperature(TemperatureModel::fit(predictions, labels)?)
        }
        CalibratorKind::Platt => {
            let scores_for = |class: usize| -> Vec<f64> {
                predictions
                    .iter()
                    .map(|p| logit(p.clamped(CLAMP_EPS)[class]))
                    .collect()
            };
            if k == 2 {
                let flags: Vec<bool> = labels.iter().map(|&y| y == 1).collect();
                CalibratorInner::PlattBinary(PlattModel::fit(&scores_for(1), &flags)?)
            } else {
                let mut models = Vec::with_capacity(k);
                for class in 0..k {
                    let flags: Vec<bool> = labels.iter().map(|&y| y == class).collect();
                    models.push(PlattModel::fit(&scores_for(class), &flags)?);
                }
                CalibratorInner::PlattOvr(models)
            }
        }
        CalibratorKind::Isotonic => {
            let fit_class = |class: usize| -> Result<IsotonicModel, FitError> {
                let scores: Vec<f64> = predictions.iter().map(|p| p[class]).collect();
                let targets: Vec<f64> = labels
                    .iter()
                    .map(|&y| if y == class { 1.0 } else { 0.0 })
                    .collect();
                IsotonicModel::fit(&scores, &targets)
            };
            if k == 2 {
                CalibratorInner::IsotonicBinary(fit_class(1)?)
            } else {
                let models: Result<Vec<_>, _> = (0..k).map(fit_class).collect();
                CalibratorInner::IsotonicOvr(models?)
            }
        }
    };
    Ok(ProbCalibrator { kind, k, inner })
}

impl ProbCalibrator {
    pub fn kind(&self) -> CalibratorKind {
        self.kind
    }

    pub fn class_count(&self) -> usize {
        self.k
    }

    /// Calibrates one prediction.
    pub fn apply(&self, p: &ProbVector) -> ProbVector {
        assert_eq!(p.len(), self.k, "class count mismatch");
        match &self.inner {
            CalibratorInner::Temperature(model) => model.apply(p),
            CalibratorInner::PlattBinary(model) => {
                let q = model.predict(logit(p.clamped(CLAMP_EPS)[1]));
                ProbVector::from_normalized(vec![1.0 - q, q])
            }
            CalibratorInner::PlattOvr(models) => {
                let clamped = p.clamped(CLAMP_EPS);
                let raw: Vec<f64> = models
                    .iter()
                    .enumerate()
                    .map(|(class, m)| m.predict(logit(clamped[class])))
                    .collect();
                renormalize(raw)
            }
            CalibratorInner::IsotonicBinary(model) => {
                let q = model.predict(p[1]);
                ProbVector::from_normalized(vec![1.0 - q, q])
            }
            CalibratorInner::IsotonicOvr(models) => {
                let raw: Vec<f64> = models
                    .iter()
                    .enumerate()
                    .map(|(class, m)| m.predict(p[class]))
                    .collect();
                renormalize(raw)
            }
        }
    }
}

fn renormalize(raw: Vec<f64>) -> ProbVector {
    // Entries are clamped to at least CLAMP_EPS, so the sum is positive.
    let sum: f64 = raw.iter().sum();
    ProbVector::from_normalized(raw.into_iter().map(|v| v / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    // --- Platt -------------------------------------------------------------

    #[test]
    fn platt_recovers_the_generating_sigmoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10_000;
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let s: f64 = rng.random_range(-4.0..4.0);
            scores.push(s);
            labels.push(rng.random::<f64>() < sigmoid(s));
        }
        let model = PlattModel::fit(&scores, &labels).unwrap();
        assert!(!model.degenerate);
        assert!((model.a - 1.0).abs() < 0.1, "a = {}", model.a);
        assert!(model.b.abs() < 0.1, "b = {}", model.b);
    }

    #[test]
    fn platt_flat_when_labels_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let n = 10_000;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let model = PlattModel::fit(&scores, &labels).unwrap();
        assert!(model.a.abs() < 0.1, "a = {}", model.a);
        assert!(model.b.abs() < 0.1, "b = {}", model.b);
    }

    #[test]
    fn platt_separable_pair_stays_clamped_and_ordered() {
        let model = PlattModel::fit(&[-1.0, 1.0], &[false, true]).unwrap();
        let lo = model.predict(-1.0);
        let hi = model.predict(1.0);
        assert!(lo >= CLAMP_EPS && hi <= 1.0 - CLAMP_EPS);
        assert!(lo < hi);
    }

    #[test]
    fn platt_single_class_is_degenerate() {
        let model = PlattModel::fit(&[0.0, 1.0, 2.0], &[true, true, true]).unwrap();
        assert!(model.degenerate);
        assert_abs_diff_eq!(model.predict(-5.0), 1.0 - CLAMP_EPS, epsilon = 1e-12);
    }

    #[test]
    fn platt_never_worsens_training_loss_vs_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let n = rng.random_range(10..200);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let labels: Vec<bool> = scores
                .iter()
                .map(|&s| rng.random::<f64>() < sigmoid(1.7 * s - 0.4))
                .collect();
            if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
                continue;
            }
            let model = PlattModel::fit(&scores, &labels).unwrap();
            let loss = |a: f64, b: f64| -> f64 {
                scores
                    .iter()
                    .zip(&labels)
                    .map(|(&s, &y)| {
                        let p = sigmoid(a * s + b).clamp(1e-15, 1.0 - 1e-15);
                        if y {
                            -p.ln()
                        } else {
                            -(1.0 - p).ln()
                        }
                    })
                    .sum::<f64>()
                    / n as f64
            };
            assert!(loss(model.a, model.b) <= loss(1.0, 0.0) + 1e-9);
        }
    }

    // --- Temperature ---------------------------------------------------------

    fn simplex_sample(rng: &mut ChaCha8Rng, k: usize) -> ProbVector {
        let raw: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().ln()).collect();
        let sum: f64 = raw.iter().sum();
        ProbVector::from_normalized(raw.iter().map(|v| v / sum).collect())
    }

    fn draw_label(rng: &mut ChaCha8Rng, p: &ProbVector) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (class, &q) in p.as_slice().iter().enumerate() {
            acc += q;
            if u < acc {
                return class;
            }
        }
        p.len() - 1
    }

    #[test]
    fn temperature_near_one_for_self_generated_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let preds: Vec<ProbVector> = (0..10_000).map(|_| simplex_sample(&mut rng, 3)).collect();
        let labels: Vec<usize> = preds.iter().map(|p| draw_label(&mut rng, p)).collect();
        let model = TemperatureModel::fit(&preds, &labels).unwrap();
        assert!(!model.boundary);
        assert!((model.t - 1.0).abs() < 0.05, "t = {}", model.t);
    }

    #[test]
    fn temperature_sharpens_flattened_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let truth: Vec<ProbVector> = (0..10_000).map(|_| simplex_sample(&mut rng, 3)).collect();
        let labels: Vec<usize> = truth.iter().map(|p| draw_label(&mut rng, p)).collect();
        let flattened: Vec<ProbVector> = truth
            .iter()
            .map(|p| {
                let raw: Vec<f64> = p.as_slice().iter().map(|v| v.sqrt()).collect();
                let sum: f64 = raw.iter().sum();
                ProbVector::from_normalized(raw.iter().map(|v| v / sum).collect())
            })
            .collect();
        let model = TemperatureModel::fit(&flattened, &labels).unwrap();
        assert!(model.t < 1.0, "t = {}", model.t);
    }

    #[test]
    fn temperature_boundary_on_degenerate_input() {
        let preds = vec![ProbVector::new(vec![1.0, 0.0]).unwrap()];
        let model = TemperatureModel::fit(&preds, &[0]).unwrap();
        assert!(model.boundary);
        assert_abs_diff_eq!(model.t, TEMPERATURE_RANGE.0, epsilon = 1e-4);
    }

    #[test]
    fn temperature_preserves_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..200 {
            let p = simplex_sample(&mut rng, 4);
            for t in [0.07, 0.5, 1.0, 3.0, 19.0] {
                let model = TemperatureModel {
                    t,
                    boundary: false,
                };
                assert_eq!(model.apply(&p).argmax(), p.argmax());
            }
        }
    }

    #[test]
    fn temperature_never_worsens_training_loss_vs_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let preds: Vec<ProbVector> = (0..500).map(|_| simplex_sample(&mut rng, 3)).collect();
        let labels: Vec<usize> = (0..500).map(|_| rng.random_range(0..3)).collect();
        let model = TemperatureModel::fit(&preds, &labels).unwrap();
        let mean_ll = |t: f64| -> f64 {
            let m = TemperatureModel { t, boundary: false };
            preds
                .iter()
                .zip(&labels)
                .map(|(p, &y)| -m.apply(p)[y].ln())
                .sum::<f64>()
                / preds.len() as f64
        };
        assert!(mean_ll(model.t) <= mean_ll(1.0) + 1e-9);
    }

    // --- Isotonic ------------------------------------------------------------

    /// Exact optimal monotone fit by dynamic programming over the grid of
    /// all contiguous-block means; the least-squares optimum is piecewise
    /// constant at such means, so the grid contains it.
    fn brute_force_monotone(scores: &[f64], targets: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap());
        let y: Vec<f64> = order.iter().map(|&i| targets[i]).collect();
        let n = y.len();
        let mut grid = Vec::new();
        for i in 0..n {
            let mut sum = 0.0;
            for j in i..n {
                sum += y[j];
                grid.push(sum / (j - i + 1) as f64);
            }
        }
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        let g = grid.len();
        let mut cost = vec![vec![f64::INFINITY; g]; n];
        let mut choice = vec![vec![0usize; g]; n];
        for (level, &v) in grid.iter().enumerate() {
            cost[0][level] = (y[0] - v) * (y[0] - v);
            choice[0][level] = level;
        }
        // Prefix minimum over levels makes each row linear in the grid size.
        for i in 1..n {
            let mut best = f64::INFINITY;
            let mut best_level = 0;
            for (level, &v) in grid.iter().enumerate() {
                if cost[i - 1][level] < best {
                    best = cost[i - 1][level];
                    best_level = level;
                }
                cost[i][level] = best + (y[i] - v) * (y[i] - v);
                choice[i][level] = best_level;
            }
        }
        let mut level = (0..g)
            .min_by(|&a, &b| cost[n - 1][a].partial_cmp(&cost[n - 1][b]).unwrap())
            .unwrap();
        let mut fitted_sorted = vec![0.0; n];
        for i in (0..n).rev() {
            fitted_sorted[i] = grid[level];
            level = choice[i][level];
        }
        fitted_sorted
    }

    #[test]
    fn isotonic_identity_on_already_monotone_targets() {
        let model = IsotonicModel::fit(&[0.0, 1.0, 2.0, 3.0], &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(model.values, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn isotonic_pools_the_violating_triple() {
        let model = IsotonicModel::fit(&[0.0, 1.0, 2.0], &[1.0, 0.0, 0.5]).unwrap();
        for v in &model.values {
            assert_abs_diff_eq!(*v, 0.5, epsilon = 1e-12);
        }
        let brute = brute_force_monotone(&[0.0, 1.0, 2.0], &[1.0, 0.0, 0.5]);
        for (a, b) in model.values.iter().zip(&brute) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn isotonic_constant_targets_fit_exactly() {
        let model = IsotonicModel::fit(&[0.0, 0.5, 1.0], &[0.3, 0.3, 0.3]).unwrap();
        for v in &model.values {
            assert_abs_diff_eq!(*v, 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn isotonic_matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let targets: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let model = IsotonicModel::fit(&scores, &targets).unwrap();
            let brute = brute_force_monotone(&scores, &targets);
            for (a, b) in model.values.iter().zip(&brute) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-6);
            }
            for pair in model.values.windows(2) {
                assert!(pair[0] <= pair[1] + 1e-12);
            }
        }
    }

    #[test]
    fn isotonic_flat_extension_beyond_data_range() {
        let model = IsotonicModel::fit(&[0.2, 0.8], &[0.1, 0.9]).unwrap();
        assert_abs_diff_eq!(model.predict(0.0), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(model.predict(1.0), 0.9, epsilon = 1e-12);
    }

    // --- Probability-vector wrapper -------------------------------------------

    #[test]
    fn wrapped_calibrators_emit_valid_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for k in [2usize, 4] {
            let preds: Vec<ProbVector> = (0..300).map(|_| simplex_sample(&mut rng, k)).collect();
            let labels: Vec<usize> = preds.iter().map(|p| draw_label(&mut rng, p)).collect();
            for kind in [
                CalibratorKind::Platt,
                CalibratorKind::Temperature,
                CalibratorKind::Isotonic,
            ] {
                let calibrator = fit_calibrator(kind, &preds, &labels).unwrap();
                assert_eq!(calibrator.class_count(), k);
                for p in preds.iter().take(50) {
                    let q = calibrator.apply(p);
                    assert_eq!(q.len(), k);
                    let sum: f64 = q.as_slice().iter().sum();
                    assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
                }
            }
        }
    }
}
