//! Prediction-stream file formats: JSON lines and CSV, with parse-time
//! clamping and class-count enforcement.
//!
//! A record is a probability vector `p`, an integer label `y` and an
//! optional opaque `id`. On parse every vector is clamped into
//! `[eps, 1 - eps]` and renormalized, so downstream log losses stay finite.

use procal_core::prob::ProbVector;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("cannot open {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: record has {got} classes but the stream started with {expected}")]
    InconsistentClassCount {
        path: String,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("{path}:{line}: label {label} out of range for {classes} classes")]
    LabelOutOfRange {
        path: String,
        line: usize,
        label: usize,
        classes: usize,
    },
    #[error("stream {path} contains no records")]
    Empty { path: String },
    #[error("cannot infer stream format from '{0}'; pass --format")]
    UnknownFormat(String),
}

/// On-disk encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    Jsonl,
    Csv,
}

impl StreamFormat {
    /// Infers the format from a path extension.
    pub fn infer(path: &Path) -> Result<Self, StreamError> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("jsonl") | Some("json") | Some("ndjson") => Ok(Self::Jsonl),
            Some("csv") => Ok(Self::Csv),
            _ => Err(StreamError::UnknownFormat(path.display().to_string())),
        }
    }
}

impl std::str::FromStr for StreamFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown format '{other}' (expected jsonl or csv)")),
        }
    }
}

/// One parsed stream record.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub p: ProbVector,
    pub y: usize,
    pub id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRecord {
    p: Vec<f64>,
    y: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_protected: Option<Vec<f64>>,
}

/// Reads and validates a stream file: every record clamped then
/// renormalized, class count fixed by the first record, labels in range.
pub fn parse_stream(
    path: &Path,
    format: StreamFormat,
    clamp_epsilon: f64,
) -> Result<Vec<StreamRecord>, StreamError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| StreamError::Io {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let records = match format {
        StreamFormat::Jsonl => parse_jsonl(reader, &display, clamp_epsilon)?,
        StreamFormat::Csv => parse_csv(reader, &display, clamp_epsilon)?,
    };
    if records.is_empty() {
        return Err(StreamError::Empty { path: display });
    }
    Ok(records)
}

fn validate_record(
    raw: Vec<f64>,
    y: usize,
    id: Option<String>,
    path: &str,
    line: usize,
    expected_k: &mut Option<usize>,
    clamp_epsilon: f64,
) -> Result<StreamRecord, StreamError> {
    let k = raw.len();
    if let Some(expected) = *expected_k {
        if k != expected {
            return Err(StreamError::InconsistentClassCount {
                path: path.to_string(),
                line,
                expected,
                got: k,
            });
        }
    }
    let p = ProbVector::new(raw).map_err(|e| StreamError::Malformed {
        path: path.to_string(),
        line,
        message: e.to_string(),
    })?;
    if y >= k {
        return Err(StreamError::LabelOutOfRange {
            path: path.to_string(),
            line,
            label: y,
            classes: k,
        });
    }
    *expected_k = Some(k);
    Ok(StreamRecord {
        p: p.clamped(clamp_epsilon),
        y,
        id,
    })
}

fn parse_jsonl<R: BufRead>(
    reader: R,
    path: &str,
    clamp_epsilon: f64,
) -> Result<Vec<StreamRecord>, StreamError> {
    let mut records = Vec::new();
    let mut expected_k = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text = line.map_err(|source| StreamError::Io {
            path: path.to_string(),
            source,
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let raw: JsonRecord =
            serde_json::from_str(&text).map_err(|e| StreamError::Malformed {
                path: path.to_string(),
                line: line_no,
                message: e.to_string(),
            })?;
        records.push(validate_record(
            raw.p,
            raw.y,
            raw.id,
            path,
            line_no,
            &mut expected_k,
            clamp_epsilon,
        )?);
    }
    Ok(records)
}

/// Header layout of a CSV stream: `p_0..p_{K-1}`, `y`, optional `id`.
struct CsvLayout {
    prob_columns: Vec<usize>,
    y_column: usize,
    id_column: Option<usize>,
}

fn csv_layout(headers: &csv::StringRecord, path: &str) -> Result<CsvLayout, StreamError> {
    let bad = |message: String| StreamError::Malformed {
        path: path.to_string(),
        line: 1,
        message,
    };
    let mut prob: Vec<(usize, usize)> = Vec::new();
    let mut y_column = None;
    let mut id_column = None;
    for (idx, name) in headers.iter().enumerate() {
        let name = name.trim();
        // Only `p_<digits>` is a probability column; everything else
        // (p_protected_*, user extras) is ignored on input.
        if let Some(rest) = name.strip_prefix("p_") {
            if let Ok(class) = rest.parse::<usize>() {
                prob.push((class, idx));
                continue;
            }
        }
        if name == "y" {
            y_column = Some(idx);
        } else if name == "id" {
            id_column = Some(idx);
        }
    }
    prob.sort();
    for (expect, &(class, _)) in prob.iter().enumerate() {
        if class != expect {
            return Err(bad(format!(
                "probability columns must be contiguous p_0..p_{{K-1}}, missing p_{expect}"
            )));
        }
    }
    if prob.len() < 2 {
        return Err(bad("need at least columns p_0 and p_1".to_string()));
    }
    Ok(CsvLayout {
        prob_columns: prob.into_iter().map(|(_, idx)| idx).collect(),
        y_column: y_column.ok_or_else(|| bad("missing column 'y'".to_string()))?,
        id_column,
    })
}

fn parse_csv<R: BufRead>(
    reader: R,
    path: &str,
    clamp_epsilon: f64,
) -> Result<Vec<StreamRecord>, StreamError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|e| StreamError::Malformed {
            path: path.to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let layout = csv_layout(&headers, path)?;

    let mut records = Vec::new();
    let mut expected_k = Some(layout.prob_columns.len());
    for (idx, row) in csv_reader.records().enumerate() {
        let line = idx + 2; // 1-based, after the header row
        let bad = |message: String| StreamError::Malformed {
            path: path.to_string(),
            line,
            message,
        };
        let row = row.map_err(|e| bad(e.to_string()))?;
        let mut raw = Vec::with_capacity(layout.prob_columns.len());
        for &col in &layout.prob_columns {
            let field = row.get(col).ok_or_else(|| bad("short row".to_string()))?;
            raw.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("column {col}: {e}")))?,
            );
        }
        let y: usize = row
            .get(layout.y_column)
            .ok_or_else(|| bad("short row".to_string()))?
            .trim()
            .parse()
            .map_err(|e| bad(format!("label: {e}")))?;
        let id = layout
            .id_column
            .and_then(|col| row.get(col))
            .filter(|s| !s.is_empty())
            .map(|s| s.to_string());
        records.push(validate_record(
            raw,
            y,
            id,
            path,
            line,
            &mut expected_k,
            clamp_epsilon,
        )?);
    }
    Ok(records)
}

/// Serializes a float the way the rest of the toolkit does: shortest string
/// that parses back to the same value.
fn fmt_float(v: f64) -> String {
    let mut buf = Vec::new();
    serde_json::to_writer(&mut buf, &v).expect("finite float");
    String::from_utf8(buf).expect("json floats are ascii")
}

/// Writes a stream, optionally with one protected vector per record.
pub fn write_stream(
    path: &Path,
    records: &[StreamRecord],
    protected: Option<&[ProbVector]>,
    format: StreamFormat,
) -> Result<(), StreamError> {
    if let Some(protected) = protected {
        assert_eq!(records.len(), protected.len(), "stream length mismatch");
    }
    let display = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|source| StreamError::Io {
        path: display.clone(),
        source,
    })?;
    let mut writer = std::io::BufWriter::new(file);
    match format {
        StreamFormat::Jsonl => {
            for (idx, record) in records.iter().enumerate() {
                let json = JsonRecord {
                    p: record.p.as_slice().to_vec(),
                    y: record.y,
                    id: record.id.clone(),
                    p_protected: protected.map(|ps| ps[idx].as_slice().to_vec()),
                };
                serde_json::to_writer(&mut writer, &json).map_err(|e| StreamError::Malformed {
                    path: display.clone(),
                    line: idx + 1,
                    message: e.to_string(),
                })?;
                writeln!(writer).map_err(|source| StreamError::Io {
                    path: display.clone(),
                    source,
                })?;
            }
        }
        StreamFormat::Csv => {
            let k = records.first().map(|r| r.p.len()).unwrap_or(2);
            let has_id = records.iter().any(|r| r.id.is_some());
            let mut csv_writer = csv::Writer::from_writer(writer);
            let io_err = |e: csv::Error| StreamError::Malformed {
                path: display.clone(),
                line: 0,
                message: e.to_string(),
            };
            let mut header: Vec<String> = (0..k).map(|c| format!("p_{c}")).collect();
            header.push("y".to_string());
            if has_id {
                header.push("id".to_string());
            }
            if protected.is_some() {
                header.extend((0..k).map(|c| format!("p_protected_{c}")));
            }
            csv_writer.write_record(&header).map_err(io_err)?;
            for (idx, record) in records.iter().enumerate() {
                let mut row: Vec<String> =
                    record.p.as_slice().iter().map(|&v| fmt_float(v)).collect();
                row.push(record.y.to_string());
                if has_id {
                    row.push(record.id.clone().unwrap_or_default());
                }
                if let Some(protected) = protected {
                    row.extend(protected[idx].as_slice().iter().map(|&v| fmt_float(v)));
                }
                csv_writer.write_record(&row).map_err(io_err)?;
            }
            csv_writer.flush().map_err(|source| StreamError::Io {
                path: display.clone(),
                source,
            })?;
        }
    }
    Ok(())
}

/// True when two parses carry the same stream. Serialized floats round-trip
/// exactly; the 1e-12 slack only absorbs the re-clamp a second parse applies
/// to entries the first clamp left a rounding step outside its bounds.
pub fn streams_equal(a: &[StreamRecord], b: &[StreamRecord]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.y == y.y
                && x.id == y.id
                && x.p.len() == y.p.len()
                && x
                    .p
                    .as_slice()
                    .iter()
                    .zip(y.p.as_slice())
                    .all(|(u, v)| (u - v).abs() <= 1e-12)
        })
}
