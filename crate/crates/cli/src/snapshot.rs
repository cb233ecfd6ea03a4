//! Versioned engine-state snapshots for checkpoint/resume.
//!
//! A snapshot captures the state at a step boundary: weights post-update,
//! before the next step's jump mixing, which is exactly what the engine's
//! resume constructor expects. The embedded config hash refuses resumes
//! under different engine parameters.

use crate::config::RunConfig;
use procal_core::jumper::{JumperConfig, JumperState};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot access snapshot {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("snapshot {path} is not valid: {message}")]
    Malformed { path: String, message: String },
    #[error("snapshot version {found} is not supported (expected {SNAPSHOT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("snapshot was written under a different configuration (hash {snapshot} vs {current})")]
    ConfigMismatch { snapshot: String, current: String },
    #[error(transparent)]
    State(#[from] procal_core::jumper::JumperError),
}

/// Self-describing serialized engine state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    /// Hash of the engine parameters and class count, from
    /// [`RunConfig::engine_hash`].
    pub config_hash: String,
    pub k: usize,
    pub step_count: u64,
    pub base_weight: f64,
    /// Row-major (jump rate, calibrator) weights.
    pub weights: Vec<f64>,
    pub n_jump_rates: usize,
    pub n_thetas: usize,
}

impl Snapshot {
    pub fn capture(state: &JumperState, config: &RunConfig, k: usize) -> Self {
        Self {
            version: SNAPSHOT_VERSION,
            config_hash: config.engine_hash(k),
            k,
            step_count: state.step_count(),
            base_weight: state.base_weight(),
            weights: state.weights().to_vec(),
            n_jump_rates: state.n_jump_rates(),
            n_thetas: state.n_thetas(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), SnapshotError> {
        let json = serde_json::to_string_pretty(self).expect("snapshot serializes");
        std::fs::write(path, json).map_err(|source| SnapshotError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        let text = std::fs::read_to_string(path).map_err(|source| SnapshotError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let snapshot: Self =
            serde_json::from_str(&text).map_err(|e| SnapshotError::Malformed {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(SnapshotError::VersionMismatch {
                found: snapshot.version,
            });
        }
        Ok(snapshot)
    }

    /// Rebuilds the engine state, verifying the config hash and every state
    /// invariant.
    pub fn restore(
        &self,
        run_config: &RunConfig,
        jumper_config: &JumperConfig,
    ) -> Result<JumperState, SnapshotError> {
        let current = run_config.engine_hash(self.k);
        if current != self.config_hash {
            return Err(SnapshotError::ConfigMismatch {
                snapshot: self.config_hash.clone(),
                current,
            });
        }
        Ok(JumperState::from_parts(
            self.base_weight,
            self.weights.clone(),
            self.step_count,
            jumper_config,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use procal_core::prob::ProbVector;
    use procal_core::Jumper;
    use tempfile::TempDir;

    fn snapshot_for(config: &RunConfig, steps: usize) -> (Snapshot, JumperConfig) {
        let jumper_config = config.jumper_config(2).unwrap();
        let mut jumper = Jumper::new(jumper_config.clone());
        for i in 0..steps {
            let p = ProbVector::new(vec![0.6, 0.4]).unwrap();
            jumper.predict_one(&p).unwrap();
            jumper.learn_one(i % 2).unwrap();
        }
        (Snapshot::capture(jumper.state(), config, 2), jumper_config)
    }

    #[test]
    fn save_load_restore_round_trip() {
        let config = RunConfig::default();
        let (snapshot, jumper_config) = snapshot_for(&config, 5);
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("state.json");
        snapshot.save(&path).unwrap();
        let loaded = Snapshot::load(&path).unwrap();
        let state = loaded.restore(&config, &jumper_config).unwrap();
        assert_eq!(state.step_count(), 5);
        assert_eq!(state.base_weight(), snapshot.base_weight);
        assert_eq!(state.weights(), snapshot.weights.as_slice());
    }

    #[test]
    fn config_mismatch_is_refused() {
        let config = RunConfig::default();
        let (snapshot, _) = snapshot_for(&config, 3);
        let other = RunConfig {
            pi: 0.25,
            ..RunConfig::default()
        };
        let jumper_config = other.jumper_config(2).unwrap();
        assert!(matches!(
            snapshot.restore(&other, &jumper_config),
            Err(SnapshotError::ConfigMismatch { .. })
        ));
    }

    #[test]
    fn version_mismatch_is_refused() {
        let config = RunConfig::default();
        let (mut snapshot, _) = snapshot_for(&config, 1);
        snapshot.version = 999;
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("state.json");
        snapshot.save(&path).unwrap();
        assert!(matches!(
            Snapshot::load(&path),
            Err(SnapshotError::VersionMismatch { found: 999 })
        ));
    }

    #[test]
    fn corrupted_state_is_refused() {
        let config = RunConfig::default();
        let (mut snapshot, jumper_config) = snapshot_for(&config, 2);
        snapshot.base_weight += 0.5;
        assert!(snapshot.restore(&config, &jumper_config).is_err());
    }
}
