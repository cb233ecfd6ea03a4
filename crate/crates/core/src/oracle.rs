//! Brute-force verifier for the jumper recursion.
//!
//! The sequential engine is the forward recursion of an explicit mixture: the
//! base process with prior weight `pi`, plus, for each jump rate, every
//! calibrator trajectory under a Markov chain that starts at the neutral
//! calibrator and resamples uniformly with probability `J` per step (one
//! transition happens before each prediction, including the first). This
//! module computes the posterior-predictive mixture by enumerating those
//! trajectories outright, which is exponential in the horizon and therefore
//! only usable on tiny instances — exactly what an independent check needs.

use crate::cox::cox_apply;
use crate::jumper::JumperConfig;
use crate::prob::{LabeledExample, ProbVector};
use thiserror::Error;

/// Enumeration ceiling: `|Theta|^horizon * |J|` may not exceed this.
pub const MAX_ENUMERATION: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance too large to enumerate: |Theta|^{horizon} * {jump_rates} trajectories")]
    InstanceTooLarge { horizon: usize, jump_rates: usize },
    #[error("horizon {horizon} exceeds stream length {len}")]
    HorizonExceedsStream { horizon: usize, len: usize },
    #[error("stream record {index} has {got} classes, expected {expected}")]
    ClassCountMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
}

fn check_instance(config: &JumperConfig, horizon: usize) -> Result<(), OracleError> {
    let n_thetas = config.grid().len() as f64;
    let n_rates = config.jump_rates().len() as f64;
    if n_thetas.powi(horizon as i32) * n_rates > MAX_ENUMERATION {
        return Err(OracleError::InstanceTooLarge {
            horizon,
            jump_rates: config.jump_rates().len(),
        });
    }
    Ok(())
}

/// Transition probability of the jump chain from calibrator `from` to `to`.
fn transition(from: usize, to: usize, rate: f64, n_thetas: usize) -> f64 {
    let uniform = rate / n_thetas as f64;
    if from == to {
        (1.0 - rate) + uniform
    } else {
        uniform
    }
}

/// Prior mass of the full component mixture at the given horizon:
/// `pi` plus the weight of every trajectory of every jump-rate branch.
/// Totals 1 for any horizon; exposed so tests can check it analytically.
pub fn prior_mass_total(config: &JumperConfig, horizon: usize) -> Result<f64, OracleError> {
    check_instance(config, horizon)?;
    let n_thetas = config.grid().len();
    let mut total = config.pi();
    for &rate in config.jump_rates() {
        let branch = (1.0 - config.pi()) / config.jump_rates().len() as f64;
        let mut sum = 0.0;
        for mut code in 0..n_thetas.pow(horizon as u32) {
            let mut weight = branch;
            let mut prev = 0usize;
            for _ in 0..horizon {
                let theta = code % n_thetas;
                code /= n_thetas;
                weight *= transition(prev, theta, rate, n_thetas);
                prev = theta;
            }
            sum += weight;
        }
        total += sum;
    }
    Ok(total)
}

/// Computes the first `horizon` protected predictions by trajectory
/// enumeration: at each step, the prior-times-likelihood weighted average of
/// every component's prediction.
pub fn enumerate_predictions(
    config: &JumperConfig,
    stream: &[LabeledExample],
    horizon: usize,
) -> Result<Vec<ProbVector>, OracleError> {
    if horizon > stream.len() {
        return Err(OracleError::HorizonExceedsStream {
            horizon,
            len: stream.len(),
        });
    }
    check_instance(config, horizon)?;
    let k = config.class_count();
    for (index, record) in stream.iter().take(horizon).enumerate() {
        if record.p.len() != k {
            return Err(OracleError::ClassCountMismatch {
                index,
                expected: k,
                got: record.p.len(),
            });
        }
    }

    let n_thetas = config.grid().len();
    // Calibrated predictions and their label likelihoods for every
    // (calibrator, step) pair.
    let calibrated: Vec<Vec<ProbVector>> = config
        .grid()
        .iter()
        .map(|theta| {
            stream
                .iter()
                .take(horizon)
                .map(|r| cox_apply(&r.p, theta))
                .collect()
        })
        .collect();
    let likelihood: Vec<Vec<f64>> = calibrated
        .iter()
        .map(|per_step| {
            per_step
                .iter()
                .zip(stream)
                .map(|(pred, r)| pred[r.y])
                .collect()
        })
        .collect();

    let branch_prior = (1.0 - config.pi()) / config.jump_rates().len() as f64;
    let mut predictions = Vec::with_capacity(horizon);
    let mut base_like = 1.0;
    for step in 0..horizon {
        // Base component.
        let mut denom = config.pi() * base_like;
        let mut numer: Vec<f64> = stream[step]
            .p
            .as_slice()
            .iter()
            .map(|&v| v * denom)
            .collect();
        // Every trajectory of length step + 1, for every jump rate.
        for &rate in config.jump_rates() {
            for mut code in 0..n_thetas.pow(step as u32 + 1) {
                let mut weight = branch_prior;
                let mut prev = 0usize;
                let mut last_theta = 0usize;
                for s in 0..=step {
                    let theta = code % n_thetas;
                    code /= n_thetas;
                    weight *= transition(prev, theta, rate, n_thetas);
                    if s < step {
                        weight *= likelihood[theta][s];
                    } else {
                        last_theta = theta;
                    }
                    prev = theta;
                }
                denom += weight;
                for (n, &c) in numer.iter_mut().zip(calibrated[last_theta][step].as_slice()) {
                    *n += weight * c;
                }
            }
        }
        for n in &mut numer {
            *n /= denom;
        }
        predictions.push(ProbVector::from_normalized(numer));
        base_like *= stream[step].p[stream[step].y];
    }
    Ok(predictions)
}
