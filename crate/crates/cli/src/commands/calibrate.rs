//! `calibrate`: run the protection layer over a recorded prediction stream
//! and emit per-step outputs, a metrics report and reliability-curve points.

use super::{fmt_float, resolve_format, to_labeled};
use crate::config::RunConfig;
use crate::snapshot::Snapshot;
use crate::stream::{parse_stream, write_stream, StreamFormat, StreamRecord};
use anyhow::Context;
use procal_core::metrics::{reliability, MetricsReport, ReliabilityCurve};
use procal_core::prob::{LabeledExample, ProbVector};
use procal_core::Jumper;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct CalibrateOptions {
    pub input: PathBuf,
    pub input_format: Option<StreamFormat>,
    pub output: PathBuf,
    pub output_format: Option<StreamFormat>,
    /// Defaults to `<output>.report.json`.
    pub report: Option<PathBuf>,
    /// Defaults to `<output>.reliability.csv`.
    pub reliability: Option<PathBuf>,
    /// When set, writes the post-update component weights of every step.
    pub weights_out: Option<PathBuf>,
    /// When set, also writes the final engine state.
    pub snapshot_out: Option<PathBuf>,
    pub config: RunConfig,
}

/// The JSON report `calibrate` writes next to its per-step output.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub n: usize,
    pub k: usize,
    pub config: RunConfig,
    pub engine_hash: String,
    /// `ln(1/pi)`: the worst-case cumulative log-loss regret.
    pub protection_cost_bound: f64,
    /// Realized cumulative log-loss difference, protected minus base.
    pub log_loss_regret_total: f64,
    pub base: MetricsReport,
    pub protected: MetricsReport,
}

pub struct CalibrateResult {
    pub report: CalibrationReport,
    pub output: PathBuf,
    pub report_path: PathBuf,
    pub reliability_path: PathBuf,
}

/// Runs one stream through the engine, writing every artifact.
pub fn run(opts: &CalibrateOptions) -> anyhow::Result<CalibrateResult> {
    opts.config.validate()?;
    let input_format = resolve_format(opts.input_format, &opts.input)?;
    let records = parse_stream(&opts.input, input_format, opts.config.clamp_epsilon)?;
    let k = records[0].p.len();
    let jumper_config = opts.config.jumper_config(k)?;

    let mut jumper = Jumper::new(jumper_config);
    let mut protected = Vec::with_capacity(records.len());
    let mut weight_rows: Vec<WeightRow> = Vec::new();
    for (step, record) in records.iter().enumerate() {
        let prediction = jumper.predict_one(&record.p)?;
        jumper.learn_one(record.y)?;
        protected.push(prediction);
        if opts.weights_out.is_some() {
            collect_weights(step + 1, &jumper, &mut weight_rows);
        }
    }

    let report = build_report(&opts.config, &records, &protected, k)?;
    let output_format = resolve_format(opts.output_format, &opts.output)?;
    write_stream(&opts.output, &records, Some(&protected), output_format)?;

    let report_path = opts
        .report
        .clone()
        .unwrap_or_else(|| derived_path(&opts.output, ".report.json"));
    std::fs::write(
        &report_path,
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .with_context(|| format!("writing report {}", report_path.display()))?;

    let reliability_path = opts
        .reliability
        .clone()
        .unwrap_or_else(|| derived_path(&opts.output, ".reliability.csv"));
    let base_stream = to_labeled(&records);
    let protected_stream: Vec<LabeledExample> = protected
        .iter()
        .zip(&records)
        .map(|(p, r)| LabeledExample {
            p: p.clone(),
            y: r.y,
        })
        .collect();
    write_reliability(
        &reliability_path,
        &[
            ("base", reliability(&base_stream, opts.config.ece_bins)?),
            (
                "protected",
                reliability(&protected_stream, opts.config.ece_bins)?,
            ),
        ],
    )?;

    if let Some(weights_path) = &opts.weights_out {
        write_weights(weights_path, &opts.config, k, &weight_rows)?;
    }
    if let Some(snapshot_path) = &opts.snapshot_out {
        Snapshot::capture(jumper.state(), &opts.config, k).save(snapshot_path)?;
    }

    Ok(CalibrateResult {
        report,
        output: opts.output.clone(),
        report_path,
        reliability_path,
    })
}

pub(crate) fn build_report(
    config: &RunConfig,
    records: &[StreamRecord],
    protected: &[ProbVector],
    k: usize,
) -> anyhow::Result<CalibrationReport> {
    let base_stream = to_labeled(records);
    let protected_stream: Vec<LabeledExample> = protected
        .iter()
        .zip(records)
        .map(|(p, r)| LabeledExample {
            p: p.clone(),
            y: r.y,
        })
        .collect();
    let base = MetricsReport::compute(&base_stream, config.ece_bins, config.ece_norm)?;
    let protected_report =
        MetricsReport::compute(&protected_stream, config.ece_bins, config.ece_norm)?;
    let n = records.len() as f64;
    Ok(CalibrationReport {
        n: records.len(),
        k,
        config: config.clone(),
        engine_hash: config.engine_hash(k),
        protection_cost_bound: (1.0 / config.pi).ln(),
        log_loss_regret_total: (protected_report.log_loss - base.log_loss) * n,
        base,
        protected: protected_report,
    })
}

fn derived_path(output: &Path, suffix: &str) -> PathBuf {
    let mut name = output.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

struct WeightRow {
    step: usize,
    component: &'static str,
    jump_rate: Option<f64>,
    theta_index: Option<usize>,
    weight: f64,
}

fn collect_weights(step: usize, jumper: &Jumper, rows: &mut Vec<WeightRow>) {
    let state = jumper.state();
    rows.push(WeightRow {
        step,
        component: "base",
        jump_rate: None,
        theta_index: None,
        weight: state.base_weight(),
    });
    for (jump_index, &rate) in jumper.config().jump_rates().iter().enumerate() {
        for theta_index in 0..jumper.config().grid().len() {
            rows.push(WeightRow {
                step,
                component: "calibrator",
                jump_rate: Some(rate),
                theta_index: Some(theta_index),
                weight: state.weight(jump_index, theta_index),
            });
        }
    }
}

fn write_weights(
    path: &Path,
    config: &RunConfig,
    k: usize,
    rows: &[WeightRow],
) -> anyhow::Result<()> {
    let grid = config.jumper_config(k)?.grid().clone();
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("writing weights {}", path.display()))?;
    writer.write_record(["step", "component", "jump_rate", "theta_index", "theta", "weight"])?;
    for row in rows {
        writer.write_record([
            row.step.to_string(),
            row.component.to_string(),
            row.jump_rate.map(fmt_float).unwrap_or_default(),
            row.theta_index.map(|t| t.to_string()).unwrap_or_default(),
            row.theta_index
                .map(|t| grid.get(t).to_string())
                .unwrap_or_default(),
            fmt_float(row.weight),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn write_reliability(
    path: &Path,
    series: &[(&str, ReliabilityCurve)],
) -> anyhow::Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("writing reliability {}", path.display()))?;
    writer.write_record([
        "series",
        "class",
        "bin_mean_predicted",
        "bin_frequency",
        "bin_weight",
    ])?;
    for (name, curve) in series {
        for (class, bins) in curve.classes.iter().enumerate() {
            for bin in bins {
                writer.write_record([
                    name.to_string(),
                    class.to_string(),
                    fmt_float(bin.mean_predicted),
                    fmt_float(bin.frequency),
                    fmt_float(bin.weight),
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

/// Human summary printed by the subcommand.
pub fn print_summary(out: &mut impl Write, report: &CalibrationReport) -> std::io::Result<()> {
    writeln!(out, "{} records, {} classes", report.n, report.k)?;
    writeln!(
        out,
        "{:<12}{:>10}{:>12}{:>12}{:>10}{:>10}",
        "", "accuracy", "brier", "log_loss", "ece", "auc"
    )?;
    for (name, metrics) in [("base", &report.base), ("protected", &report.protected)] {
        writeln!(
            out,
            "{:<12}{:>10.4}{:>12.4}{:>12.4}{:>10.4}{:>10}",
            name,
            metrics.accuracy,
            metrics.brier,
            metrics.log_loss,
            metrics.ece,
            metrics
                .auc
                .map(|a| format!("{a:.4}"))
                .unwrap_or_else(|| "-".to_string()),
        )?;
    }
    writeln!(
        out,
        "cumulative log-loss regret {:.6} (bound {:.6})",
        report.log_loss_regret_total, report.protection_cost_bound
    )
}
