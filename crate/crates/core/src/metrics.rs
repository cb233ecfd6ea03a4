//! Scoring and calibration diagnostics: log loss, Brier loss, per-class
//! expected calibration error, accuracy, binary AUC and reliability curves.
//!
//! The calibration error is the per-class variant: for each class the
//! predicted probabilities are split into equal-mass bins, each bin
//! contributes the gap between its mean prediction and the empirical label
//! frequency, and the per-class errors are averaged over classes. This is a
//! stronger notion than top-prediction calibration for multiclass streams.

use crate::prob::LabeledExample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of equal-mass bins.
pub const DEFAULT_ECE_BINS: usize = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("metric requires a nonempty stream")]
    EmptyStream,
    #[error("record {index} assigns probability 0 to its label; clamp inputs first")]
    ZeroProbabilityLabel { index: usize },
    #[error("AUC requires a binary stream, got {0} classes")]
    AucNotBinary(usize),
    #[error("AUC requires both classes present")]
    AucSingleClass,
    #[error("binning requires at least 1 bin")]
    NoBins,
    #[error("records disagree on class count: {0} vs {1}")]
    ClassCountMismatch(usize, usize),
}

/// Norm used to aggregate per-bin gaps into a per-class error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EceNorm {
    L1,
    #[default]
    L2,
}

impl std::str::FromStr for EceNorm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            other => Err(format!("unknown ECE norm '{other}' (expected l1 or l2)")),
        }
    }
}

impl std::fmt::Display for EceNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::L1 => write!(f, "l1"),
            Self::L2 => write!(f, "l2"),
        }
    }
}

fn check_stream(stream: &[LabeledExample]) -> Result<usize, MetricsError> {
    let first = stream.first().ok_or(MetricsError::EmptyStream)?;
    let k = first.p.len();
    for rec in stream {
        if rec.p.len() != k {
            return Err(MetricsError::ClassCountMismatch(k, rec.p.len()));
        }
    }
    Ok(k)
}

/// Mean negative log probability of the realized labels.
pub fn log_loss(stream: &[LabeledExample]) -> Result<f64, MetricsError> {
    check_stream(stream)?;
    let mut total = 0.0;
    for (index, rec) in stream.iter().enumerate() {
        let p = rec.p[rec.y];
        if p <= 0.0 {
            return Err(MetricsError::ZeroProbabilityLabel { index });
        }
        total -= p.ln();
    }
    Ok(total / stream.len() as f64)
}

/// Mean squared distance between the prediction and the one-hot label,
/// summed over classes; ranges over `[0, 2]`.
pub fn brier_loss(stream: &[LabeledExample]) -> Result<f64, MetricsError> {
    check_stream(stream)?;
    let total: f64 = stream
        .iter()
        .map(|rec| {
            rec.p
                .as_slice()
                .iter()
                .enumerate()
                .map(|(class, &p)| {
                    let target = if class == rec.y { 1.0 } else { 0.0 };
                    (p - target) * (p - target)
                })
                .sum::<f64>()
        })
        .sum();
    Ok(total / stream.len() as f64)
}

/// Fraction of records whose largest predicted entry matches the label
/// (ties break to the lowest class index).
pub fn accuracy(stream: &[LabeledExample]) -> Result<f64, MetricsError> {
    check_stream(stream)?;
    let hits = stream.iter().filter(|r| r.p.argmax() == r.y).count();
    Ok(hits as f64 / stream.len() as f64)
}

/// One equal-mass bin of one class's predicted probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    /// Mean predicted probability inside the bin.
    pub mean_predicted: f64,
    /// Empirical frequency of the class inside the bin.
    pub frequency: f64,
    /// Fraction of the stream that fell in the bin.
    pub weight: f64,
}

/// Per-class reliability points from equal-mass binning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityCurve {
    pub classes: Vec<Vec<ReliabilityBin>>,
}

/// Splits one class's predicted probabilities into at most `bins` equal-mass
/// bins. Edges are quantiles of the observed values, so ties collapse into a
/// single bin instead of being split arbitrarily.
fn bin_class(
    values: &[f64],
    hits: impl Fn(usize) -> bool,
    bins: usize,
) -> Vec<ReliabilityBin> {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let edges: Vec<f64> = (1..bins).map(|j| sorted[j * n / bins]).collect();

    let mut count = vec![0usize; bins];
    let mut pred_sum = vec![0.0; bins];
    let mut hit_sum = vec![0.0; bins];
    for (i, &v) in values.iter().enumerate() {
        let bin = edges.partition_point(|&e| e <= v).min(bins - 1);
        count[bin] += 1;
        pred_sum[bin] += v;
        if hits(i) {
            hit_sum[bin] += 1.0;
        }
    }
    (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| ReliabilityBin {
            mean_predicted: pred_sum[b] / count[b] as f64,
            frequency: hit_sum[b] / count[b] as f64,
            weight: count[b] as f64 / n as f64,
        })
        .collect()
}

/// Per-class expected calibration error over equal-mass bins, averaged
/// across classes.
pub fn ece(stream: &[LabeledExample], bins: usize, norm: EceNorm) -> Result<f64, MetricsError> {
    let k = check_stream(stream)?;
    if bins == 0 {
        return Err(MetricsError::NoBins);
    }
    let mut total = 0.0;
    for class in 0..k {
        let values: Vec<f64> = stream.iter().map(|r| r.p[class]).collect();
        let class_bins = bin_class(&values, |i| stream[i].y == class, bins);
        let err = match norm {
            EceNorm::L1 => class_bins
                .iter()
                .map(|b| b.weight * (b.mean_predicted - b.frequency).abs())
                .sum::<f64>(),
            EceNorm::L2 => class_bins
                .iter()
                .map(|b| {
                    let gap = b.mean_predicted - b.frequency;
                    b.weight * gap * gap
                })
                .sum::<f64>()
                .sqrt(),
        };
        total += err;
    }
    Ok(total / k as f64)
}

/// Reliability-curve points per class, using the same equal-mass binning as
/// [`ece`].
pub fn reliability(
    stream: &[LabeledExample],
    bins: usize,
) -> Result<ReliabilityCurve, MetricsError> {
    let k = check_stream(stream)?;
    if bins == 0 {
        return Err(MetricsError::NoBins);
    }
    let classes = (0..k)
        .map(|class| {
            let values: Vec<f64> = stream.iter().map(|r| r.p[class]).collect();
            bin_class(&values, |i| stream[i].y == class, bins)
        })
        .collect();
    Ok(ReliabilityCurve { classes })
}

/// Binary area under the ROC curve via the midrank Mann-Whitney statistic.
pub fn auc(stream: &[LabeledExample]) -> Result<f64, MetricsError> {
    let k = check_stream(stream)?;
    if k != 2 {
        return Err(MetricsError::AucNotBinary(k));
    }
    let n_pos = stream.iter().filter(|r| r.y == 1).count();
    let n_neg = stream.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::AucSingleClass);
    }

    let mut scored: Vec<(f64, bool)> = stream.iter().map(|r| (r.p[1], r.y == 1)).collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j < scored.len() && scored[j].0 == scored[i].0 {
            j += 1;
        }
        // Midrank of the tie group spanning 1-based ranks i+1 ..= j.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for item in &scored[i..j] {
            if item.1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let n_pos = n_pos as f64;
    let n_neg = n_neg as f64;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// Aggregate report over one prediction stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub log_loss: f64,
    pub brier: f64,
    pub ece: f64,
    pub accuracy: f64,
    /// Present only for binary streams with both classes observed.
    pub auc: Option<f64>,
    pub n: usize,
}

impl MetricsReport {
    pub fn compute(
        stream: &[LabeledExample],
        bins: usize,
        norm: EceNorm,
    ) -> Result<Self, MetricsError> {
        let auc = match auc(stream) {
            Ok(v) => Some(v),
            Err(MetricsError::AucNotBinary(_)) | Err(MetricsError::AucSingleClass) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            log_loss: log_loss(stream)?,
            brier: brier_loss(stream)?,
            ece: ece(stream, bins, norm)?,
            accuracy: accuracy(stream)?,
            auc,
            n: stream.len(),
        })
    }
}
