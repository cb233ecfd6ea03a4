//! Desk-scale dataset-shift lab: a synthetic classification-data generator,
//! two built-in classifiers, the four shift scenarios applied to test
//! streams, and the experiment harness that grids them against calibrators
//! and protection.

mod data;
mod experiment;
mod models;
mod scenario;

pub use data::{generate, Dataset, SyntheticSpec};
pub use experiment::{
    run_scenario_experiment, CellKey, ExperimentCell, ExperimentPlan, ProtectionSettings,
};
pub use models::{fit_simple, ModelKind, SimpleModel};
pub use scenario::{apply_scenario, ScenarioKind, ShiftScenario};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShiftError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("concept shift is defined for binary labels only, got {0} classes")]
    ConceptShiftNotBinary(usize),
    #[error("affected tail {tail} exceeds test size {n}")]
    TailTooLong { tail: usize, n: usize },
    #[error("training data must contain at least 2 classes")]
    SingleClassTrainingData,
    #[error("scenario removed every test example")]
    EmptyStream,
    #[error(transparent)]
    Jumper(#[from] crate::jumper::JumperError),
    #[error(transparent)]
    Fit(#[from] crate::baselines::FitError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}
