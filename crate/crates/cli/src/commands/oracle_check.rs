//! `oracle-check`: randomized battery comparing the sequential engine
//! against explicit trajectory enumeration on tiny instances.

use procal_core::cox::{ThetaGrid, ThetaParams};
use procal_core::jumper::{process_stream, JumperConfig};
use procal_core::oracle::enumerate_predictions;
use procal_core::prob::{LabeledExample, ProbVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct OracleCheckOptions {
    pub instances: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub max_horizon: usize,
}

impl Default for OracleCheckOptions {
    fn default() -> Self {
        Self {
            instances: 100,
            tolerance: 1e-9,
            seed: 0,
            max_horizon: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleCheckReport {
    pub instances: usize,
    pub passed: usize,
    pub max_deviation: f64,
    pub failures: Vec<String>,
}

impl OracleCheckReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.instances
    }
}

fn random_grid(rng: &mut ChaCha8Rng, k: usize, max_thetas: usize) -> ThetaGrid {
    let target = rng.random_range(1..=max_thetas);
    let mut thetas = vec![ThetaParams::neutral(k)];
    let mut attempts = 0;
    while thetas.len() < target && attempts < 50 {
        attempts += 1;
        let beta = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let mut alpha = vec![0.0; k];
        alpha[rng.random_range(0..k)] = [1.0, -1.0][rng.random_range(0..2)];
        let theta = ThetaParams::new(alpha, beta).expect("valid parameters");
        let candidate: Vec<ThetaParams> =
            thetas.iter().cloned().chain([theta]).collect();
        if let Ok(grid) = ThetaGrid::from_thetas(candidate) {
            thetas = grid.iter().cloned().collect();
        }
    }
    ThetaGrid::from_thetas(thetas).expect("neutral-first grid")
}

fn random_stream(rng: &mut ChaCha8Rng, k: usize, len: usize) -> Vec<LabeledExample> {
    (0..len)
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
            let sum: f64 = raw.iter().sum();
            let p = ProbVector::new(raw.iter().map(|v| v / sum).collect()).expect("simplex");
            LabeledExample::new(p, rng.random_range(0..k)).expect("label in range")
        })
        .collect()
}

/// Runs the battery: random tiny instances (k in {2,3}, up to 4 calibrators,
/// up to 2 jump rates, random pi), engine versus enumeration at every step.
pub fn run_battery(opts: &OracleCheckOptions) -> OracleCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut passed = 0;
    let mut max_deviation: f64 = 0.0;
    let mut failures = Vec::new();
    for instance in 0..opts.instances {
        let k = if rng.random::<bool>() { 2 } else { 3 };
        let grid = random_grid(&mut rng, k, 4);
        let n_rates = rng.random_range(1..=2);
        let mut rates: Vec<f64> = Vec::new();
        while rates.len() < n_rates {
            let rate: f64 = rng.random_range(0.001..0.9);
            if !rates.contains(&rate) {
                rates.push(rate);
            }
        }
        let pi = rng.random_range(0.05..0.95);
        let config = JumperConfig::new(pi, rates, grid).expect("valid config");
        let len = rng.random_range(1..=opts.max_horizon);
        let stream = random_stream(&mut rng, k, len);

        let expected = enumerate_predictions(&config, &stream, len)
            .expect("instances sized under the enumeration guard");
        let (outcomes, _) = process_stream(&config, &stream).expect("clamped stream");
        let mut deviation: f64 = 0.0;
        for (want, got) in expected.iter().zip(&outcomes) {
            for (a, b) in want.as_slice().iter().zip(got.protected.as_slice()) {
                deviation = deviation.max((a - b).abs());
            }
        }
        max_deviation = max_deviation.max(deviation);
        if deviation < opts.tolerance {
            passed += 1;
        } else {
            failures.push(format!(
                "instance {instance}: max deviation {deviation:.3e} (k={k}, n={len})"
            ));
        }
    }
    OracleCheckReport {
        instances: opts.instances,
        passed,
        max_deviation,
        failures,
    }
}
