//! Experiment harness: grids {base, calibrated} x {standard, protected}
//! variants over seeds for one scenario and model, reporting per-seed and
//! mean metrics.

use super::{apply_scenario, fit_simple, generate, ModelKind, ShiftError, ShiftScenario, SyntheticSpec};
use crate::baselines::{fit_calibrator, CalibratorKind, CLAMP_EPS};
use crate::cox::{ThetaGrid, DEFAULT_ALPHA_MAGNITUDES, DEFAULT_BETAS};
use crate::jumper::{process_stream, JumperConfig, DEFAULT_JUMP_RATES, DEFAULT_PI};
use crate::metrics::{EceNorm, MetricsReport, DEFAULT_ECE_BINS};
use crate::prob::LabeledExample;
use serde::{Deserialize, Serialize};

/// Engine parameters used for the protected variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectionSettings {
    pub pi: f64,
    pub jump_rates: Vec<f64>,
    pub betas: Vec<f64>,
    pub alpha_magnitudes: Vec<f64>,
}

impl Default for ProtectionSettings {
    fn default() -> Self {
        Self {
            pi: DEFAULT_PI,
            jump_rates: DEFAULT_JUMP_RATES.to_vec(),
            betas: DEFAULT_BETAS.to_vec(),
            alpha_magnitudes: DEFAULT_ALPHA_MAGNITUDES.to_vec(),
        }
    }
}

impl ProtectionSettings {
    pub fn jumper_config(&self, k: usize) -> Result<JumperConfig, ShiftError> {
        let grid = ThetaGrid::build(k, &self.betas, &self.alpha_magnitudes)
            .map_err(crate::jumper::JumperError::from)?;
        Ok(JumperConfig::new(self.pi, self.jump_rates.clone(), grid)?)
    }
}

/// One scenario/model battery.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub data: SyntheticSpec,
    pub scenario: ShiftScenario,
    pub model: ModelKind,
    /// Post-hoc baselines to evaluate next to the raw base predictions.
    pub calibrators: Vec<CalibratorKind>,
    pub protection: ProtectionSettings,
    pub seeds: Vec<u64>,
    pub ece_bins: usize,
    pub ece_norm: EceNorm,
    pub clamp_epsilon: f64,
}

impl ExperimentPlan {
    pub fn new(data: SyntheticSpec, scenario: ShiftScenario, model: ModelKind) -> Self {
        Self {
            data,
            scenario,
            model,
            calibrators: Vec::new(),
            protection: ProtectionSettings::default(),
            seeds: vec![0, 1, 2, 3, 4],
            ece_bins: DEFAULT_ECE_BINS,
            ece_norm: EceNorm::default(),
            clamp_epsilon: CLAMP_EPS,
        }
    }
}

/// Identifies one cell of the result grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellKey {
    pub scenario: super::ScenarioKind,
    pub model: ModelKind,
    /// `None` is the raw base prediction.
    pub calibrator: Option<CalibratorKind>,
    pub protected: bool,
}

impl CellKey {
    pub fn calibrator_name(&self) -> String {
        match self.calibrator {
            None => "base".to_string(),
            Some(kind) => kind.to_string(),
        }
    }
}

/// Per-seed metrics for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub key: CellKey,
    pub per_seed: Vec<MetricsReport>,
}

impl ExperimentCell {
    pub fn mean(&self, metric: impl Fn(&MetricsReport) -> f64) -> f64 {
        self.per_seed.iter().map(&metric).sum::<f64>() / self.per_seed.len() as f64
    }

    pub fn mean_log_loss(&self) -> f64 {
        self.mean(|r| r.log_loss)
    }

    pub fn mean_brier(&self) -> f64 {
        self.mean(|r| r.brier)
    }

    pub fn mean_ece(&self) -> f64 {
        self.mean(|r| r.ece)
    }

    pub fn mean_accuracy(&self) -> f64 {
        self.mean(|r| r.accuracy)
    }
}

/// Runs the full grid: every calibrator variant (base first), each with and
/// without protection. Seeds are independent work units and fan out across
/// threads; results are assembled in seed order, so output is deterministic.
pub fn run_scenario_experiment(plan: &ExperimentPlan) -> Result<Vec<ExperimentCell>, ShiftError> {
    let variants: Vec<Option<CalibratorKind>> = std::iter::once(None)
        .chain(plan.calibrators.iter().copied().map(Some))
        .collect();
    let jumper_config = plan.protection.jumper_config(plan.data.k)?;

    let per_seed: Vec<Vec<(MetricsReport, MetricsReport)>> = plan
        .seeds
        .par_iter()
        .map(|&seed| run_seed(plan, &variants, &jumper_config, seed))
        .collect::<Result<_, _>>()?;

    let mut cells: Vec<ExperimentCell> = Vec::new();
    for (v, &calibrator) in variants.iter().enumerate() {
        for protected in [false, true] {
            cells.push(ExperimentCell {
                key: CellKey {
                    scenario: plan.scenario.kind,
                    model: plan.model,
                    calibrator,
                    protected,
                },
                per_seed: per_seed
                    .iter()
                    .map(|reports| {
                        let (standard, protected_report) = &reports[v];
                        if protected {
                            protected_report.clone()
                        } else {
                            standard.clone()
                        }
                    })
                    .collect(),
            });
        }
    }
    Ok(cells)
}

/// One seed's work: generate, fit, shift, then score every variant with and
/// without protection.
fn run_seed(
    plan: &ExperimentPlan,
    variants: &[Option<CalibratorKind>],
    jumper_config: &crate::jumper::JumperConfig,
    seed: u64,
) -> Result<Vec<(MetricsReport, MetricsReport)>, ShiftError> {
    let spec = plan.data.with_seed(seed);
    let (train, test) = generate(&spec)?;

    // First half fits the classifier, second half fits the post-hoc
    // calibrators; every variant shares the same underlying model.
    let split = train.len() / 2;
    let fit_set = super::Dataset {
        x: train.x[..split].to_vec(),
        y: train.y[..split].to_vec(),
        k: train.k,
    };
    let cal_set = super::Dataset {
        x: train.x[split..].to_vec(),
        y: train.y[split..].to_vec(),
        k: train.k,
    };
    let model = fit_simple(plan.model, &fit_set)?;

    let cal_preds: Vec<_> = cal_set
        .x
        .iter()
        .map(|row| model.predict_proba(row).clamped(plan.clamp_epsilon))
        .collect();
    let fitted: Vec<_> = plan
        .calibrators
        .iter()
        .map(|&kind| fit_calibrator(kind, &cal_preds, &cal_set.y))
        .collect::<Result<_, _>>()?;

    let stream_data = apply_scenario(&test, &plan.scenario, seed)?;
    let base_stream: Vec<LabeledExample> = stream_data
        .x
        .iter()
        .zip(&stream_data.y)
        .map(|(row, &y)| {
            LabeledExample::new(model.predict_proba(row).clamped(plan.clamp_epsilon), y)
                .expect("labels come from the dataset")
        })
        .collect();

    let mut reports = Vec::with_capacity(variants.len());
    for (v, &calibrator) in variants.iter().enumerate() {
        let stream: Vec<LabeledExample> = match calibrator {
            None => base_stream.clone(),
            Some(_) => {
                let cal = &fitted[v - 1];
                base_stream
                    .iter()
                    .map(|rec| LabeledExample {
                        p: cal.apply(&rec.p).clamped(plan.clamp_epsilon),
                        y: rec.y,
                    })
                    .collect()
            }
        };
        let standard = MetricsReport::compute(&stream, plan.ece_bins, plan.ece_norm)?;

        let (outcomes, _) = process_stream(jumper_config, &stream)?;
        let protected_stream: Vec<LabeledExample> = outcomes
            .into_iter()
            .zip(&stream)
            .map(|(out, rec)| LabeledExample {
                p: out.protected,
                y: rec.y,
            })
            .collect();
        let protected = MetricsReport::compute(&protected_stream, plan.ece_bins, plan.ece_norm)?;

        // The engine guarantee, surfaced through the harness.
        let n = stream.len() as f64;
        debug_assert!(
            protected.log_loss * n
                <= standard.log_loss * n + jumper_config.protection_cost() + 1e-9
        );
        reports.push((standard, protected));
    }
    Ok(reports)
}
