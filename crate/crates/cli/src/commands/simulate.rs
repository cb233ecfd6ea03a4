//! `simulate`: generate a synthetic dataset, fit a built-in classifier and
//! write the scenario-shifted base prediction stream.

use super::resolve_format;
use crate::stream::{write_stream, StreamFormat, StreamRecord};
use procal_core::shift::{
    apply_scenario, fit_simple, generate, Dataset, ModelKind, ShiftScenario, SyntheticSpec,
};
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub spec: SyntheticSpec,
    pub scenario: ShiftScenario,
    pub model: ModelKind,
    pub clamp_epsilon: f64,
    pub output: PathBuf,
    pub output_format: Option<StreamFormat>,
}

pub struct SimulateResult {
    pub n: usize,
    pub k: usize,
    pub output: PathBuf,
}

/// Mirrors the experiment harness: the classifier is fit on the first half
/// of the training data, so a stream simulated here replays the harness's
/// base cell exactly.
pub fn run(opts: &SimulateOptions) -> anyhow::Result<SimulateResult> {
    let (train, test) = generate(&opts.spec)?;
    let split = train.len() / 2;
    let fit_set = Dataset {
        x: train.x[..split].to_vec(),
        y: train.y[..split].to_vec(),
        k: train.k,
    };
    let model = fit_simple(opts.model, &fit_set)?;
    let stream_data = apply_scenario(&test, &opts.scenario, opts.spec.seed)?;

    let records: Vec<StreamRecord> = stream_data
        .x
        .iter()
        .zip(&stream_data.y)
        .map(|(row, &y)| StreamRecord {
            p: model.predict_proba(row).clamped(opts.clamp_epsilon),
            y,
            id: None,
        })
        .collect();
    let format = resolve_format(opts.output_format, &opts.output)?;
    write_stream(&opts.output, &records, None, format)?;
    Ok(SimulateResult {
        n: records.len(),
        k: stream_data.k,
        output: opts.output.clone(),
    })
}
