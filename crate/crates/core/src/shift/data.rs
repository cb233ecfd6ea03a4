//! Synthetic classification datasets: Gaussian class clusters on the leading
//! informative features, pure-noise remaining features, deterministic per
//! seed.

use super::ShiftError;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Recipe for one synthetic dataset pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_features: usize,
    /// Leading features carrying class signal; the rest are standard-normal
    /// noise.
    pub n_informative: usize,
    pub k: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Scale of the random per-class cluster centers.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_features: 20,
            n_informative: 5,
            k: 2,
            n_train: 2000,
            n_test: 1000,
            separation: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn validate(&self) -> Result<(), ShiftError> {
        if self.k < 2 {
            return Err(ShiftError::InvalidSpec(format!(
                "need at least 2 classes, got {}",
                self.k
            )));
        }
        if self.n_informative == 0 || self.n_informative > self.n_features {
            return Err(ShiftError::InvalidSpec(format!(
                "n_informative must lie in 1..={}, got {}",
                self.n_features, self.n_informative
            )));
        }
        if self.n_train < self.k || self.n_test == 0 {
            return Err(ShiftError::InvalidSpec(
                "train/test sizes too small".to_string(),
            ));
        }
        if !self.separation.is_finite() || self.separation < 0.0 {
            return Err(ShiftError::InvalidSpec(format!(
                "separation must be a nonnegative finite value, got {}",
                self.separation
            )));
        }
        Ok(())
    }
}

/// Feature rows with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub k: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Generates a (train, test) pair. Labels are uniform over classes; the
/// train set is patched to contain every class. Same seed, same bits.
pub fn generate(spec: &SyntheticSpec) -> Result<(Dataset, Dataset), ShiftError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.k)
        .map(|_| {
            (0..spec.n_informative)
                .map(|_| spec.separation * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();

    let mut draw = |n: usize| -> Dataset {
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let label = rng.random_range(0..spec.k);
            let mut row = Vec::with_capacity(spec.n_features);
            for j in 0..spec.n_features {
                let noise: f64 = rng.sample(StandardNormal);
                if j < spec.n_informative {
                    row.push(centers[label][j] + noise);
                } else {
                    row.push(noise);
                }
            }
            x.push(row);
            y.push(label);
        }
        Dataset { x, y, k: spec.k }
    };

    let mut train = draw(spec.n_train);
    let test = draw(spec.n_test);

    // Guarantee every class appears in train: overwrite the first rows with
    // any missing labels (their features are redrawn from the right cluster).
    let mut present = vec![false; spec.k];
    for &label in &train.y {
        present[label] = true;
    }
    let mut slot = 0;
    for class in 0..spec.k {
        if !present[class] {
            train.y[slot] = class;
            for j in 0..spec.n_informative {
                let noise: f64 = rng.sample(StandardNormal);
                train.x[slot][j] = centers[class][j] + noise;
            }
            slot += 1;
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = SyntheticSpec::default();
        let (train_a, test_a) = generate(&spec).unwrap();
        let (train_b, test_b) = generate(&spec).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
    }

    #[test]
    fn default_shapes() {
        let (train, test) = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(train.len(), 2000);
        assert_eq!(test.len(), 1000);
        assert!(train.x.iter().all(|row| row.len() == 20));
        assert!(test.x.iter().all(|row| row.len() == 20));
    }

    #[test]
    fn every_class_present_in_train() {
        for seed in 0..5 {
            let spec = SyntheticSpec {
                k: 10,
                n_train: 30,
                ..SyntheticSpec::default()
            }
            .with_seed(seed);
            let (train, _) = generate(&spec).unwrap();
            for class in 0..10 {
                assert!(train.y.contains(&class), "class {class} missing");
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad_k = SyntheticSpec {
            k: 1,
            ..SyntheticSpec::default()
        };
        assert!(generate(&bad_k).is_err());
        let bad_informative = SyntheticSpec {
            n_informative: 21,
            ..SyntheticSpec::default()
        };
        assert!(generate(&bad_informative).is_err());
    }
}
