//! Run configuration: engine and metric parameters, a plain key-value file
//! format, and the canonical hash that snapshots embed.

use procal_core::cox::{ThetaGrid, DEFAULT_ALPHA_MAGNITUDES, DEFAULT_BETAS};
use procal_core::jumper::{JumperConfig, DEFAULT_JUMP_RATES, DEFAULT_PI};
use procal_core::metrics::{EceNorm, DEFAULT_ECE_BINS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_CLAMP_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Engine(#[from] procal_core::jumper::JumperError),
}

/// Everything a run needs beyond its input stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub pi: f64,
    pub jump_rates: Vec<f64>,
    pub betas: Vec<f64>,
    pub alpha_magnitudes: Vec<f64>,
    pub clamp_epsilon: f64,
    pub ece_bins: usize,
    pub ece_norm: EceNorm,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pi: DEFAULT_PI,
            jump_rates: DEFAULT_JUMP_RATES.to_vec(),
            betas: DEFAULT_BETAS.to_vec(),
            alpha_magnitudes: DEFAULT_ALPHA_MAGNITUDES.to_vec(),
            clamp_epsilon: DEFAULT_CLAMP_EPSILON,
            ece_bins: DEFAULT_ECE_BINS,
            ece_norm: EceNorm::L2,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Parses a `key = value` file. Lists are comma-separated; `#` starts a
    /// comment; unknown keys are rejected.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::default();
        config.apply_text(&text)?;
        config.validate()?;
        Ok(config)
    }

    fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Malformed {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |message: String| ConfigError::Malformed { line, message };
            match key {
                "pi" => {
                    self.pi = value
                        .parse()
                        .map_err(|e| bad(format!("pi: {e}")))?;
                }
                "jump_rates" => {
                    self.jump_rates = parse_list(value).map_err(|e| bad(format!("jump_rates: {e}")))?;
                }
                "betas" => {
                    self.betas = parse_list(value).map_err(|e| bad(format!("betas: {e}")))?;
                }
                "alpha_magnitudes" => {
                    self.alpha_magnitudes =
                        parse_list(value).map_err(|e| bad(format!("alpha_magnitudes: {e}")))?;
                }
                "clamp_epsilon" => {
                    self.clamp_epsilon = value
                        .parse()
                        .map_err(|e| bad(format!("clamp_epsilon: {e}")))?;
                }
                "ece_bins" => {
                    self.ece_bins = value
                        .parse()
                        .map_err(|e| bad(format!("ece_bins: {e}")))?;
                }
                "ece_norm" => {
                    self.ece_norm = value
                        .parse()
                        .map_err(|e| bad(format!("ece_norm: {e}")))?;
                }
                "seed" => {
                    self.seed = value
                        .parse()
                        .map_err(|e| bad(format!("seed: {e}")))?;
                }
                other => {
                    return Err(bad(format!("unknown key '{other}'")));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.pi.is_finite() || self.pi <= 0.0 || self.pi >= 1.0 {
            return Err(ConfigError::Invalid(format!(
                "pi must lie strictly between 0 and 1, got {}",
                self.pi
            )));
        }
        if !(0.0..=0.01).contains(&self.clamp_epsilon) || self.clamp_epsilon == 0.0 {
            return Err(ConfigError::Invalid(format!(
                "clamp_epsilon must lie in (0, 0.01], got {}",
                self.clamp_epsilon
            )));
        }
        if self.ece_bins == 0 {
            return Err(ConfigError::Invalid("ece_bins must be at least 1".into()));
        }
        Ok(())
    }

    /// Builds the engine configuration for a `k`-class stream.
    pub fn jumper_config(&self, k: usize) -> Result<JumperConfig, ConfigError> {
        let grid = ThetaGrid::build(k, &self.betas, &self.alpha_magnitudes)
            .map_err(procal_core::jumper::JumperError::from)?;
        Ok(JumperConfig::new(self.pi, self.jump_rates.clone(), grid)?)
    }

    /// Hash of the engine-relevant parameters plus the class count; a
    /// snapshot only resumes under the hash it was written with.
    pub fn engine_hash(&self, k: usize) -> String {
        #[derive(Serialize)]
        struct EngineParams<'a> {
            pi: f64,
            jump_rates: &'a [f64],
            betas: &'a [f64],
            alpha_magnitudes: &'a [f64],
            clamp_epsilon: f64,
            k: usize,
        }
        let canonical = serde_json::to_string(&EngineParams {
            pi: self.pi,
            jump_rates: &self.jump_rates,
            betas: &self.betas,
            alpha_magnitudes: &self.alpha_magnitudes,
            clamp_epsilon: self.clamp_epsilon,
            k,
        })
        .expect("plain numeric struct serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|item| item.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}
