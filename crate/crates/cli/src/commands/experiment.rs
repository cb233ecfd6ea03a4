//! `experiment`: run scenario batteries over models, baselines and seeds,
//! with and without protection, and emit a long-format CSV table.

use super::fmt_float;
use crate::config::RunConfig;
use anyhow::Context;
use procal_core::baselines::CalibratorKind;
use procal_core::metrics::MetricsReport;
use procal_core::shift::{
    run_scenario_experiment, ExperimentCell, ExperimentPlan, ModelKind, ProtectionSettings,
    ScenarioKind, ShiftScenario, SyntheticSpec,
};
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub data: SyntheticSpec,
    pub scenarios: Vec<ScenarioKind>,
    pub models: Vec<ModelKind>,
    pub baselines: Vec<CalibratorKind>,
    pub seeds: Vec<u64>,
    pub affected_tail: usize,
    pub permute_after: bool,
    pub config: RunConfig,
    pub output: PathBuf,
}

pub struct ExperimentResult {
    pub cells: Vec<ExperimentCell>,
    pub rows_written: usize,
    pub output: PathBuf,
}

pub fn run(opts: &ExperimentOptions) -> anyhow::Result<ExperimentResult> {
    opts.config.validate()?;
    let protection = ProtectionSettings {
        pi: opts.config.pi,
        jump_rates: opts.config.jump_rates.clone(),
        betas: opts.config.betas.clone(),
        alpha_magnitudes: opts.config.alpha_magnitudes.clone(),
    };
    let mut cells = Vec::new();
    for &scenario in &opts.scenarios {
        for &model in &opts.models {
            let mut plan = ExperimentPlan::new(
                opts.data.clone(),
                ShiftScenario::new(scenario)
                    .tail(opts.affected_tail)
                    .permute(opts.permute_after),
                model,
            );
            plan.calibrators = opts.baselines.clone();
            plan.protection = protection.clone();
            plan.seeds = opts.seeds.clone();
            plan.ece_bins = opts.config.ece_bins;
            plan.ece_norm = opts.config.ece_norm;
            plan.clamp_epsilon = opts.config.clamp_epsilon;
            cells.extend(run_scenario_experiment(&plan)?);
        }
    }

    let rows_written = write_table(&opts.output, &cells, opts.seeds.len())?;
    Ok(ExperimentResult {
        cells,
        rows_written,
        output: opts.output.clone(),
    })
}

/// One CSV row per (cell, metric): scenario, classifier, calibrator,
/// protected-flag, metric, mean, then the per-seed values.
fn write_table(
    path: &PathBuf,
    cells: &[ExperimentCell],
    n_seeds: usize,
) -> anyhow::Result<usize> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("writing table {}", path.display()))?;
    let mut header = vec![
        "scenario".to_string(),
        "classifier".to_string(),
        "calibrator".to_string(),
        "protected".to_string(),
        "metric".to_string(),
        "mean".to_string(),
    ];
    header.extend((0..n_seeds).map(|s| format!("seed_{s}")));
    writer.write_record(&header)?;

    fn extract(report: &MetricsReport, metric: &str) -> Option<f64> {
        match metric {
            "log_loss" => Some(report.log_loss),
            "brier" => Some(report.brier),
            "ece" => Some(report.ece),
            "accuracy" => Some(report.accuracy),
            "auc" => report.auc,
            other => unreachable!("unknown metric {other}"),
        }
    }

    let mut rows = 0usize;
    for cell in cells {
        for name in ["log_loss", "brier", "ece", "accuracy", "auc"] {
            let values: Vec<Option<f64>> =
                cell.per_seed.iter().map(|r| extract(r, name)).collect();
            if values.iter().any(|v| v.is_none()) {
                continue; // AUC absent on some seed: skip the row entirely
            }
            let values: Vec<f64> = values.into_iter().map(|v| v.unwrap()).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let mut row = vec![
                cell.key.scenario.to_string(),
                cell.key.model.to_string(),
                cell.key.calibrator_name(),
                if cell.key.protected {
                    "protected".to_string()
                } else {
                    "standard".to_string()
                },
                name.to_string(),
                fmt_float(mean),
            ];
            row.extend(values.iter().map(|&v| fmt_float(v)));
            writer.write_record(&row)?;
            rows += 1;
        }
    }
    writer.flush()?;
    Ok(rows)
}
