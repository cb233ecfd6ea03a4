//! Composite Jumper predictor: a sequential mixture over the base prediction
//! and Cox-calibrated predictions whose weights follow a jump-Markov prior
//! and are Bayes-updated on each observed label.
//!
//! Per step the engine (1) diffuses each jump-rate row of the weight matrix
//! toward the uniform calibrator distribution, (2) emits the weighted mixture
//! as the protected prediction, (3) multiplies every component weight by the
//! probability it assigned to the realized label, and (4) renormalizes. The
//! base component's weight never renormalizes below zero capital, which gives
//! the worst-case guarantee
//!
//! ```text
//! sum -log protected(y) <= sum -log base(y) + log(1/pi)
//! ```

use crate::cox::{cox_apply, ThetaGrid};
use crate::prob::{LabeledExample, ProbVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default prior weight kept on the raw base prediction; protection then
/// costs at most `ln 2` cumulative log loss.
pub const DEFAULT_PI: f64 = 0.5;

/// Default jump rates.
pub const DEFAULT_JUMP_RATES: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Total weight below which an update is considered to have lost all capital.
const MASS_UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JumperError {
    #[error(transparent)]
    Grid(#[from] crate::cox::CoxError),
    #[error("pi must lie strictly between 0 and 1, got {0}")]
    InvalidPi(f64),
    #[error("jump rates must be a nonempty list of distinct values in (0, 1)")]
    InvalidJumpRates,
    #[error("prediction has {got} classes but the calibrator grid expects {expected}")]
    ClassCountMismatch { expected: usize, got: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("every mixture component assigned zero probability to the observed label")]
    ZeroTotalLikelihood,
    #[error("state dimensions do not match the configuration")]
    StateShapeMismatch,
    #[error("state mass sums to {0}, too far from 1")]
    StateMassInvalid(f64),
    #[error("a prediction is already pending; supply its label first")]
    PredictionPending,
    #[error("label supplied at step {0} before a prediction was requested")]
    LabelBeforePrediction(u64),
}

/// Static parameters of a run: base prior weight, jump rates, calibrator grid.
#[derive(Debug, Clone)]
pub struct JumperConfig {
    pi: f64,
    jump_rates: Vec<f64>,
    grid: ThetaGrid,
}

impl JumperConfig {
    pub fn new(pi: f64, jump_rates: Vec<f64>, grid: ThetaGrid) -> Result<Self, JumperError> {
        if !pi.is_finite() || pi <= 0.0 || pi >= 1.0 {
            return Err(JumperError::InvalidPi(pi));
        }
        if jump_rates.is_empty()
            || jump_rates
                .iter()
                .any(|&j| !j.is_finite() || j <= 0.0 || j >= 1.0)
        {
            return Err(JumperError::InvalidJumpRates);
        }
        for (i, a) in jump_rates.iter().enumerate() {
            if jump_rates[i + 1..].contains(a) {
                return Err(JumperError::InvalidJumpRates);
            }
        }
        Ok(Self {
            pi,
            jump_rates,
            grid,
        })
    }

    /// Default configuration for `k` classes: `pi = 0.5`, jump rates
    /// `{1e-2, 1e-3, 1e-4}`, default calibrator grid.
    pub fn with_defaults(k: usize) -> Result<Self, JumperError> {
        let grid = ThetaGrid::build_default(k)?;
        Self::new(DEFAULT_PI, DEFAULT_JUMP_RATES.to_vec(), grid)
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn jump_rates(&self) -> &[f64] {
        &self.jump_rates
    }

    pub fn grid(&self) -> &ThetaGrid {
        &self.grid
    }

    /// Worst-case cumulative log-loss regret against the base predictions.
    pub fn protection_cost(&self) -> f64 {
        (1.0 / self.pi).ln()
    }

    pub fn class_count(&self) -> usize {
        self.grid.class_count()
    }
}

/// The capital ledger: base weight `P`, one weight per (jump rate, calibrator)
/// pair, and the number of completed steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumperState {
    base_weight: f64,
    weights: Vec<f64>,
    n_jump_rates: usize,
    n_thetas: usize,
    step_count: u64,
}

impl JumperState {
    /// Initial state: all protection mass `(1 - pi)/|J|` sits on the neutral
    /// calibrator of each jump-rate row.
    pub fn init(config: &JumperConfig) -> Self {
        let n_jump_rates = config.jump_rates.len();
        let n_thetas = config.grid.len();
        let mut weights = vec![0.0; n_jump_rates * n_thetas];
        let share = (1.0 - config.pi) / n_jump_rates as f64;
        for row in 0..n_jump_rates {
            weights[row * n_thetas] = share;
        }
        Self {
            base_weight: config.pi,
            weights,
            n_jump_rates,
            n_thetas,
            step_count: 0,
        }
    }

    /// Rebuilds a state from raw parts (snapshot restore), revalidating the
    /// shape and mass invariants against `config`.
    pub fn from_parts(
        base_weight: f64,
        weights: Vec<f64>,
        step_count: u64,
        config: &JumperConfig,
    ) -> Result<Self, JumperError> {
        let n_jump_rates = config.jump_rates.len();
        let n_thetas = config.grid.len();
        if weights.len() != n_jump_rates * n_thetas {
            return Err(JumperError::StateShapeMismatch);
        }
        if !base_weight.is_finite()
            || base_weight < 0.0
            || weights.iter().any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(JumperError::StateMassInvalid(f64::NAN));
        }
        let mass = base_weight + weights.iter().sum::<f64>();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(JumperError::StateMassInvalid(mass));
        }
        Ok(Self {
            base_weight,
            weights,
            n_jump_rates,
            n_thetas,
            step_count,
        })
    }

    pub fn base_weight(&self) -> f64 {
        self.base_weight
    }

    /// Row-major weights, one row of `n_thetas` entries per jump rate.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, jump_index: usize, theta_index: usize) -> f64 {
        self.weights[jump_index * self.n_thetas + theta_index]
    }

    pub fn n_jump_rates(&self) -> usize {
        self.n_jump_rates
    }

    pub fn n_thetas(&self) -> usize {
        self.n_thetas
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn total_mass(&self) -> f64 {
        self.base_weight + self.weights.iter().sum::<f64>()
    }
}

/// Weights after the per-step jump mixing, together with everything cached
/// for the pending Bayes update.
#[derive(Debug, Clone)]
pub struct MixedState {
    base_weight: f64,
    weights: Vec<f64>,
    n_jump_rates: usize,
    n_thetas: usize,
    step_count: u64,
    base_p: ProbVector,
    calibrated: Vec<ProbVector>,
    protected: ProbVector,
}

impl MixedState {
    pub fn protected(&self) -> &ProbVector {
        &self.protected
    }

    pub fn base(&self) -> &ProbVector {
        &self.base_p
    }
}

/// What one completed step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// The mixture prediction issued for the step.
    pub protected: ProbVector,
    /// The base prediction the step consumed.
    pub base: ProbVector,
    /// The renormalization constant, identically the protected probability
    /// of the label that was then observed.
    pub normalizer: f64,
}

/// Applies the jump mixing and forms the protected prediction.
///
/// Mixing precedes the prediction on every step, including the first: each
/// jump-rate row keeps `1 - J` of every weight in place and spreads `J` of
/// the row total uniformly over all calibrators.
pub fn predict(
    state: &JumperState,
    config: &JumperConfig,
    p: &ProbVector,
) -> Result<(ProbVector, MixedState), JumperError> {
    let k = config.class_count();
    if p.len() != k {
        return Err(JumperError::ClassCountMismatch {
            expected: k,
            got: p.len(),
        });
    }
    debug_assert_eq!(state.n_jump_rates, config.jump_rates.len());
    debug_assert_eq!(state.n_thetas, config.grid.len());

    let n_thetas = state.n_thetas;
    let mut weights = state.weights.clone();
    for (row, &rate) in config.jump_rates.iter().enumerate() {
        let slice = &mut weights[row * n_thetas..(row + 1) * n_thetas];
        let row_mass: f64 = slice.iter().sum();
        let refill = row_mass * rate / n_thetas as f64;
        for w in slice.iter_mut() {
            *w = (1.0 - rate) * *w + refill;
        }
    }

    let calibrated: Vec<ProbVector> = config.grid.iter().map(|t| cox_apply(p, t)).collect();

    let mut mix: Vec<f64> = p.as_slice().iter().map(|&v| v * state.base_weight).collect();
    for row in 0..state.n_jump_rates {
        for (theta_idx, cal) in calibrated.iter().enumerate() {
            let w = weights[row * n_thetas + theta_idx];
            for (m, &c) in mix.iter_mut().zip(cal.as_slice()) {
                *m += w * c;
            }
        }
    }
    let mix_sum: f64 = mix.iter().sum();
    // Component predictions each sum to 1 and weights sum to 1, so the
    // mixture is already on the simplex up to rounding.
    for m in &mut mix {
        *m /= mix_sum;
    }
    let protected = ProbVector::from_normalized(mix);

    let mixed = MixedState {
        base_weight: state.base_weight,
        weights,
        n_jump_rates: state.n_jump_rates,
        n_thetas,
        step_count: state.step_count,
        base_p: p.clone(),
        calibrated,
        protected: protected.clone(),
    };
    Ok((protected, mixed))
}

/// Bayes-updates every component on the observed label and renormalizes.
pub fn update(mixed: MixedState, y: usize) -> Result<(JumperState, StepOutcome), JumperError> {
    let k = mixed.base_p.len();
    if y >= k {
        return Err(JumperError::LabelOutOfRange {
            label: y,
            classes: k,
        });
    }
    let MixedState {
        base_weight,
        mut weights,
        n_jump_rates,
        n_thetas,
        step_count,
        base_p,
        calibrated,
        protected,
    } = mixed;

    let base_weight = base_weight * base_p[y];
    let mut total = base_weight;
    for row in 0..n_jump_rates {
        for theta_idx in 0..n_thetas {
            let w = &mut weights[row * n_thetas + theta_idx];
            *w *= calibrated[theta_idx][y];
            total += *w;
        }
    }
    if total.is_nan() || total <= MASS_UNDERFLOW {
        return Err(JumperError::ZeroTotalLikelihood);
    }
    let normalizer = total;
    let inv = 1.0 / total;
    let state = JumperState {
        base_weight: base_weight * inv,
        weights: {
            for w in &mut weights {
                *w *= inv;
            }
            weights
        },
        n_jump_rates,
        n_thetas,
        step_count: step_count + 1,
    };
    debug_assert!((state.total_mass() - 1.0).abs() <= 1e-9);
    Ok((
        state,
        StepOutcome {
            protected,
            base: base_p,
            normalizer,
        },
    ))
}

/// Folds `predict` and `update` over an entire stream.
pub fn process_stream(
    config: &JumperConfig,
    stream: &[LabeledExample],
) -> Result<(Vec<StepOutcome>, JumperState), JumperError> {
    let mut state = JumperState::init(config);
    let mut outcomes = Vec::with_capacity(stream.len());
    for record in stream {
        let (_, mixed) = predict(&state, config, &record.p)?;
        let (next, outcome) = update(mixed, record.y)?;
        state = next;
        outcomes.push(outcome);
    }
    Ok((outcomes, state))
}

/// Stateful wrapper enforcing the predict-then-observe protocol: a
/// prediction must be served for step `n` before the label of step `n`
/// is supplied.
#[derive(Debug, Clone)]
pub struct Jumper {
    config: JumperConfig,
    state: JumperState,
    pending: Option<MixedState>,
}

impl Jumper {
    pub fn new(config: JumperConfig) -> Self {
        let state = JumperState::init(&config);
        Self {
            config,
            state,
            pending: None,
        }
    }

    /// Resumes from a previously saved state.
    pub fn from_state(config: JumperConfig, state: JumperState) -> Result<Self, JumperError> {
        let restored =
            JumperState::from_parts(state.base_weight, state.weights, state.step_count, &config)?;
        Ok(Self {
            config,
            state: restored,
            pending: None,
        })
    }

    pub fn config(&self) -> &JumperConfig {
        &self.config
    }

    /// The state after the last completed step (post-update, pre-next-mix).
    pub fn state(&self) -> &JumperState {
        &self.state
    }

    pub fn has_pending_prediction(&self) -> bool {
        self.pending.is_some()
    }

    /// Serves the protected prediction for the next step.
    pub fn predict_one(&mut self, p: &ProbVector) -> Result<ProbVector, JumperError> {
        if self.pending.is_some() {
            return Err(JumperError::PredictionPending);
        }
        let (protected, mixed) = predict(&self.state, &self.config, p)?;
        self.pending = Some(mixed);
        Ok(protected)
    }

    /// Supplies the label for the pending prediction and completes the step.
    pub fn learn_one(&mut self, y: usize) -> Result<StepOutcome, JumperError> {
        let mixed = self
            .pending
            .take()
            .ok_or(JumperError::LabelBeforePrediction(self.state.step_count + 1))?;
        match update(mixed, y) {
            Ok((state, outcome)) => {
                self.state = state;
                Ok(outcome)
            }
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::ThetaParams;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn pv(entries: &[f64]) -> ProbVector {
        ProbVector::new(entries.to_vec()).unwrap()
    }

    fn two_theta_config(pi: f64, rate: f64) -> JumperConfig {
        let grid = ThetaGrid::from_thetas(vec![
            ThetaParams::neutral(2),
            ThetaParams::new(vec![0.0, 0.0], 0.5).unwrap(),
        ])
        .unwrap();
        JumperConfig::new(pi, vec![rate], grid).unwrap()
    }

    #[test]
    fn init_places_mass_on_neutral_calibrator() {
        let grid = ThetaGrid::build_default(2).unwrap();
        let cfg = JumperConfig::new(0.5, vec![0.1, 0.2, 0.3], grid).unwrap();
        let state = JumperState::init(&cfg);
        assert_eq!(state.base_weight(), 0.5);
        for row in 0..3 {
            assert_abs_diff_eq!(state.weight(row, 0), 1.0 / 6.0, epsilon = 1e-15);
            for theta in 1..cfg.grid().len() {
                assert_eq!(state.weight(row, theta), 0.0);
            }
        }
        assert_abs_diff_eq!(state.total_mass(), 1.0, epsilon = 1e-12);

        let degenerate = JumperConfig::new(0.5, vec![0.1], ThetaGrid::neutral_only(2)).unwrap();
        let state = JumperState::init(&degenerate);
        assert_eq!(state.base_weight(), 0.5);
        assert_eq!(state.weight(0, 0), 0.5);

        let cfg = JumperConfig::new(
            0.9,
            vec![0.1, 0.2],
            ThetaGrid::build_default(2).unwrap(),
        )
        .unwrap();
        let state = JumperState::init(&cfg);
        assert_abs_diff_eq!(state.weight(0, 0), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(state.weight(1, 0), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn config_validation() {
        let grid = ThetaGrid::neutral_only(2);
        assert!(matches!(
            JumperConfig::new(0.0, vec![0.1], grid.clone()),
            Err(JumperError::InvalidPi(_))
        ));
        assert!(matches!(
            JumperConfig::new(1.0, vec![0.1], grid.clone()),
            Err(JumperError::InvalidPi(_))
        ));
        assert!(matches!(
            JumperConfig::new(0.5, vec![], grid.clone()),
            Err(JumperError::InvalidJumpRates)
        ));
        assert!(matches!(
            JumperConfig::new(0.5, vec![0.1, 0.1], grid.clone()),
            Err(JumperError::InvalidJumpRates)
        ));
        assert!(matches!(
            JumperConfig::new(0.5, vec![1.0], grid),
            Err(JumperError::InvalidJumpRates)
        ));
    }

    /// Hand-executed single step: pi = 0.5, one jump rate 0.5, the neutral
    /// calibrator plus the square-root calibrator, p = [0.8, 0.2], y = 0.
    #[test]
    fn worked_single_step() {
        let cfg = two_theta_config(0.5, 0.5);
        let state = JumperState::init(&cfg);
        let p = pv(&[0.8, 0.2]);
        let (protected, mixed) = predict(&state, &cfg, &p).unwrap();
        assert_abs_diff_eq!(mixed.weights[0], 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(mixed.weights[1], 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(protected[0], 0.783333, epsilon = 1e-6);
        assert_abs_diff_eq!(protected[1], 0.216667, epsilon = 1e-6);

        let (next, outcome) = update(mixed, 0).unwrap();
        assert_abs_diff_eq!(outcome.normalizer, 0.783333, epsilon = 1e-6);
        assert_abs_diff_eq!(outcome.normalizer, protected[0], epsilon = 1e-12);
        assert_abs_diff_eq!(next.base_weight(), 0.510638, epsilon = 1e-6);
        assert_abs_diff_eq!(next.weight(0, 0), 0.382979, epsilon = 1e-6);
        assert_abs_diff_eq!(next.weight(0, 1), 0.106383, epsilon = 1e-6);
        assert_eq!(next.step_count(), 1);
        assert_abs_diff_eq!(next.total_mass(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn neutral_only_grid_reproduces_base() {
        let cfg = JumperConfig::new(0.3, vec![0.01, 0.2], ThetaGrid::neutral_only(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let stream: Vec<LabeledExample> = (0..50)
            .map(|_| {
                let raw: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 1e-3).collect();
                let sum: f64 = raw.iter().sum();
                let p = ProbVector::new(raw.iter().map(|v| v / sum).collect()).unwrap();
                let y = rng.random_range(0..3);
                LabeledExample::new(p, y).unwrap()
            })
            .collect();
        let (outcomes, _) = process_stream(&cfg, &stream).unwrap();
        for (out, rec) in outcomes.iter().zip(&stream) {
            for (a, b) in out.protected.as_slice().iter().zip(rec.p.as_slice()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn uniform_input_stays_uniform_when_offsets_are_zero() {
        let grid = ThetaGrid::from_thetas(vec![
            ThetaParams::neutral(3),
            ThetaParams::new(vec![0.0; 3], 0.5).unwrap(),
            ThetaParams::new(vec![0.0; 3], 2.0).unwrap(),
        ])
        .unwrap();
        let cfg = JumperConfig::new(0.4, vec![0.05, 0.3], grid).unwrap();
        let state = JumperState::init(&cfg);
        let (protected, _) = predict(&state, &cfg, &ProbVector::uniform(3)).unwrap();
        for &v in protected.as_slice() {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn one_hot_likelihoods_leave_state_unchanged() {
        let cfg = JumperConfig::new(0.5, vec![0.2], ThetaGrid::neutral_only(2)).unwrap();
        let state = JumperState::init(&cfg);
        // With only the neutral calibrator a (clamped-free) one-hot correct
        // prediction multiplies every component by 1.
        let p = pv(&[1.0, 0.0]);
        let (_, mixed) = predict(&state, &cfg, &p).unwrap();
        let (next, _) = update(mixed, 0).unwrap();
        assert_abs_diff_eq!(next.base_weight(), state.base_weight(), epsilon = 1e-15);
        assert_abs_diff_eq!(next.weight(0, 0), state.weight(0, 0), epsilon = 1e-15);
    }

    #[test]
    fn empty_stream_returns_init_state() {
        let cfg = JumperConfig::with_defaults(2).unwrap();
        let (outcomes, state) = process_stream(&cfg, &[]).unwrap();
        assert!(outcomes.is_empty());
        assert_eq!(state, JumperState::init(&cfg));
    }

    #[test]
    fn inconsistent_class_count_is_an_error() {
        let cfg = JumperConfig::with_defaults(2).unwrap();
        let stream = vec![
            LabeledExample::new(pv(&[0.5, 0.5]), 0).unwrap(),
            LabeledExample::new(ProbVector::uniform(3), 2).unwrap(),
        ];
        assert!(matches!(
            process_stream(&cfg, &stream),
            Err(JumperError::ClassCountMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn label_out_of_range_is_an_error() {
        let cfg = JumperConfig::with_defaults(2).unwrap();
        let state = JumperState::init(&cfg);
        let (_, mixed) = predict(&state, &cfg, &pv(&[0.6, 0.4])).unwrap();
        assert!(matches!(
            update(mixed, 2),
            Err(JumperError::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn all_components_zero_is_an_error() {
        // Base and the (neutral-only) calibrated prediction both put zero
        // mass on the observed label.
        let cfg = JumperConfig::new(0.5, vec![0.1], ThetaGrid::neutral_only(2)).unwrap();
        let state = JumperState::init(&cfg);
        let (_, mixed) = predict(&state, &cfg, &pv(&[1.0, 0.0])).unwrap();
        assert!(matches!(
            update(mixed, 1),
            Err(JumperError::ZeroTotalLikelihood)
        ));
    }

    #[test]
    fn prequential_protocol_violations() {
        let mut jumper = Jumper::new(JumperConfig::with_defaults(2).unwrap());
        assert!(matches!(
            jumper.learn_one(0),
            Err(JumperError::LabelBeforePrediction(1))
        ));
        jumper.predict_one(&pv(&[0.7, 0.3])).unwrap();
        assert!(matches!(
            jumper.predict_one(&pv(&[0.7, 0.3])),
            Err(JumperError::PredictionPending)
        ));
        jumper.learn_one(1).unwrap();
        assert_eq!(jumper.state().step_count(), 1);
    }

    #[test]
    fn prequential_matches_process_stream() {
        let cfg = JumperConfig::with_defaults(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let stream: Vec<LabeledExample> = (0..100)
            .map(|_| {
                let raw: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 1e-3).collect();
                let sum: f64 = raw.iter().sum();
                let p = ProbVector::new(raw.iter().map(|v| v / sum).collect()).unwrap();
                LabeledExample::new(p, rng.random_range(0..3)).unwrap()
            })
            .collect();
        let (outcomes, final_state) = process_stream(&cfg, &stream).unwrap();
        let mut jumper = Jumper::new(cfg);
        for (record, expected) in stream.iter().zip(&outcomes) {
            let protected = jumper.predict_one(&record.p).unwrap();
            assert_eq!(protected, expected.protected);
            let outcome = jumper.learn_one(record.y).unwrap();
            assert_eq!(outcome.normalizer, expected.normalizer);
        }
        assert_eq!(jumper.state(), &final_state);
    }

    #[test]
    fn from_parts_validates() {
        let cfg = JumperConfig::with_defaults(2).unwrap();
        let n = cfg.jump_rates().len() * cfg.grid().len();
        assert!(matches!(
            JumperState::from_parts(0.5, vec![0.5; n], 3, &cfg),
            Err(JumperError::StateMassInvalid(_))
        ));
        assert!(matches!(
            JumperState::from_parts(0.5, vec![0.5], 3, &cfg),
            Err(JumperError::StateShapeMismatch)
        ));
        let mut weights = vec![0.0; n];
        weights[0] = 0.5;
        let state = JumperState::from_parts(0.5, weights, 3, &cfg).unwrap();
        assert_eq!(state.step_count(), 3);
    }

    fn arb_stream(k: usize, len: usize) -> impl Strategy<Value = Vec<LabeledExample>> {
        proptest::collection::vec(
            (
                proptest::collection::vec(1e-4f64..1.0, k),
                0usize..k,
            ),
            len,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .map(|(raw, y)| {
                    let sum: f64 = raw.iter().sum();
                    let p = ProbVector::from_normalized(raw.iter().map(|v| v / sum).collect());
                    LabeledExample::new(p, y).unwrap()
                })
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mass_is_conserved_after_every_update(
            stream in arb_stream(3, 20),
            pi in 0.05f64..0.95,
        ) {
            let cfg = JumperConfig::new(pi, vec![0.01, 0.1], ThetaGrid::build_default(3).unwrap()).unwrap();
            let mut state = JumperState::init(&cfg);
            prop_assert!((state.total_mass() - 1.0).abs() <= 1e-9);
            for rec in &stream {
                let (_, mixed) = predict(&state, &cfg, &rec.p).unwrap();
                let (next, _) = update(mixed, rec.y).unwrap();
                state = next;
                prop_assert!((state.total_mass() - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn jump_mixing_conserves_per_row_mass(stream in arb_stream(2, 8)) {
            let cfg = JumperConfig::with_defaults(2).unwrap();
            let n_thetas = cfg.grid().len();
            let mut state = JumperState::init(&cfg);
            for rec in &stream {
                let row_masses: Vec<f64> = (0..cfg.jump_rates().len())
                    .map(|r| (0..n_thetas).map(|t| state.weight(r, t)).sum())
                    .collect();
                let (_, mixed) = predict(&state, &cfg, &rec.p).unwrap();
                for (r, &before) in row_masses.iter().enumerate() {
                    let after: f64 = mixed.weights[r * n_thetas..(r + 1) * n_thetas].iter().sum();
                    prop_assert!((after - before).abs() <= 1e-12);
                }
                let (next, _) = update(mixed, rec.y).unwrap();
                state = next;
            }
        }

        #[test]
        fn normalizer_equals_protected_probability_of_label(stream in arb_stream(3, 12)) {
            let cfg = JumperConfig::with_defaults(3).unwrap();
            let (outcomes, _) = process_stream(&cfg, &stream).unwrap();
            for (out, rec) in outcomes.iter().zip(&stream) {
                prop_assert!((out.normalizer - out.protected[rec.y]).abs() <= 1e-12);
            }
        }

        #[test]
        fn protection_cost_bound_holds(stream in arb_stream(2, 40), pi in 0.1f64..0.9) {
            let cfg = JumperConfig::new(pi, DEFAULT_JUMP_RATES.to_vec(), ThetaGrid::build_default(2).unwrap()).unwrap();
            let (outcomes, _) = process_stream(&cfg, &stream).unwrap();
            let protected: f64 = outcomes
                .iter()
                .zip(&stream)
                .map(|(o, r)| -o.protected[r.y].ln())
                .sum();
            let base: f64 = stream.iter().map(|r| -r.p[r.y].ln()).sum();
            prop_assert!(protected <= base + cfg.protection_cost() + 1e-9);
        }

        #[test]
        fn reordering_rates_and_grid_members_changes_nothing(stream in arb_stream(2, 10)) {
            let grid = ThetaGrid::build_default(2).unwrap();
            let thetas: Vec<ThetaParams> = grid.iter().cloned().collect();
            // Keep the neutral element at index 0, reverse the rest.
            let mut permuted = vec![thetas[0].clone()];
            permuted.extend(thetas[1..].iter().rev().cloned());
            let grid_perm = ThetaGrid::from_thetas(permuted).unwrap();

            let cfg_a = JumperConfig::new(0.5, vec![0.01, 0.001, 0.0001], grid).unwrap();
            let cfg_b = JumperConfig::new(0.5, vec![0.0001, 0.01, 0.001], grid_perm).unwrap();
            let (out_a, _) = process_stream(&cfg_a, &stream).unwrap();
            let (out_b, _) = process_stream(&cfg_b, &stream).unwrap();
            for (a, b) in out_a.iter().zip(&out_b) {
                for (x, y) in a.protected.as_slice().iter().zip(b.protected.as_slice()) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }
}
