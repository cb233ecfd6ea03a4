//! Implementations behind the CLI subcommands.

pub mod calibrate;
pub mod experiment;
pub mod oracle_check;
pub mod prequential;
pub mod simulate;

use crate::stream::{StreamFormat, StreamRecord};
use procal_core::prob::LabeledExample;
use std::path::Path;

/// Resolves an explicit format or falls back to the path extension.
pub(crate) fn resolve_format(
    explicit: Option<StreamFormat>,
    path: &Path,
) -> Result<StreamFormat, crate::stream::StreamError> {
    match explicit {
        Some(format) => Ok(format),
        None => StreamFormat::infer(path),
    }
}

pub(crate) fn to_labeled(records: &[StreamRecord]) -> Vec<LabeledExample> {
    records
        .iter()
        .map(|r| LabeledExample {
            p: r.p.clone(),
            y: r.y,
        })
        .collect()
}

/// Shortest float serialization that parses back exactly; shared by every
/// CSV the toolkit writes.
pub(crate) fn fmt_float(v: f64) -> String {
    let mut buf = Vec::new();
    serde_json::to_writer(&mut buf, &v).expect("finite float");
    String::from_utf8(buf).expect("json floats are ascii")
}
