//! Online protected calibration for probabilistic classifiers.
//!
//! The centre of the crate is a betting-style recalibration layer that wraps
//! any base classifier emitting probability vectors: a mixture over the raw
//! base prediction and a grid of Cox recalibration maps, with weights that
//! jump-diffuse and are Bayes-updated on every observed label. The mixture
//! adapts to dataset shift while its cumulative log loss can never exceed the
//! base's by more than `log(1/pi)`.
//!
//! Around the engine sit the pieces a calibration study needs: an exhaustive
//! trajectory-enumeration verifier for the recursion, proper-scoring and
//! calibration-error metrics, classical post-hoc baselines (Platt,
//! temperature, isotonic), and a small lab of synthetic dataset-shift
//! scenarios with built-in classifiers.

pub mod baselines;
pub mod cox;
pub mod jumper;
pub mod metrics;
pub mod oracle;
pub mod prob;
pub mod shift;

pub use cox::{cox_apply, ThetaGrid, ThetaParams};
pub use jumper::{Jumper, JumperConfig, JumperState, StepOutcome};
pub use metrics::{EceNorm, MetricsReport};
pub use prob::{LabeledExample, ProbVector};
