//! `prequential`: drive a stream through the predict-then-observe protocol
//! one record at a time, with checkpoint and resume.

use super::resolve_format;
use crate::config::RunConfig;
use crate::snapshot::Snapshot;
use crate::stream::{parse_stream, write_stream, StreamFormat};
use anyhow::{bail, Context};
use procal_core::Jumper;
use std::path::PathBuf;

#[derive(Debug, Clone)]
pub struct PrequentialOptions {
    pub input: PathBuf,
    pub input_format: Option<StreamFormat>,
    pub output: PathBuf,
    pub output_format: Option<StreamFormat>,
    pub config: RunConfig,
    /// Resume from this snapshot; the run continues after its step count and
    /// the output holds only the continued steps.
    pub resume: Option<PathBuf>,
    /// Stop once the engine has completed this many steps in total.
    pub halt_after: Option<u64>,
    pub snapshot_out: Option<PathBuf>,
}

pub struct PrequentialResult {
    /// 1-based step range processed, inclusive.
    pub first_step: u64,
    pub last_step: u64,
    pub stream_len: usize,
    pub output: PathBuf,
}

pub fn run(opts: &PrequentialOptions) -> anyhow::Result<PrequentialResult> {
    opts.config.validate()?;
    let input_format = resolve_format(opts.input_format, &opts.input)?;
    let records = parse_stream(&opts.input, input_format, opts.config.clamp_epsilon)?;
    let k = records[0].p.len();
    let jumper_config = opts.config.jumper_config(k)?;

    let mut jumper = match &opts.resume {
        Some(path) => {
            let snapshot = Snapshot::load(path)?;
            if snapshot.k != k {
                bail!(
                    "snapshot {} was taken on a {}-class stream, input has {k}",
                    path.display(),
                    snapshot.k
                );
            }
            let state = snapshot.restore(&opts.config, &jumper_config)?;
            Jumper::from_state(jumper_config, state)?
        }
        None => Jumper::new(jumper_config),
    };

    let start = jumper.state().step_count() as usize;
    if start > records.len() {
        bail!(
            "snapshot is {start} steps in, but the stream has only {} records",
            records.len()
        );
    }
    let end = match opts.halt_after {
        Some(halt) => {
            let halt = halt as usize;
            if halt < start {
                bail!("cannot halt after step {halt}: the snapshot is already at step {start}");
            }
            halt.min(records.len())
        }
        None => records.len(),
    };

    let mut protected = Vec::with_capacity(end - start);
    for record in &records[start..end] {
        let prediction = jumper
            .predict_one(&record.p)
            .context("protocol violation")?;
        jumper.learn_one(record.y).context("protocol violation")?;
        protected.push(prediction);
    }

    let output_format = resolve_format(opts.output_format, &opts.output)?;
    write_stream(&opts.output, &records[start..end], Some(&protected), output_format)?;

    if let Some(snapshot_path) = &opts.snapshot_out {
        Snapshot::capture(jumper.state(), &opts.config, k).save(snapshot_path)?;
    }

    Ok(PrequentialResult {
        first_step: start as u64 + 1,
        last_step: end as u64,
        stream_len: records.len(),
        output: opts.output.clone(),
    })
}
