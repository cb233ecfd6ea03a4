//! The four test-stream shift scenarios: identity, tail label flip, tail
//! feature filter, tail class removal — each optionally followed by a random
//! permutation of the whole stream.

use super::{Dataset, ShiftError};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Unperturbed,
    /// Swap the binary class labels on the tail.
    ConceptShift,
    /// Keep only tail rows whose first informative feature is negative.
    XImbalance,
    /// Drop tail rows labeled 0.
    YImbalance,
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "unperturbed" => Ok(Self::Unperturbed),
            "concept_shift" => Ok(Self::ConceptShift),
            "x_imbalance" => Ok(Self::XImbalance),
            "y_imbalance" => Ok(Self::YImbalance),
            other => Err(format!(
                "unknown scenario '{other}' (expected unperturbed, concept_shift, x_imbalance or y_imbalance)"
            )),
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Self::Unperturbed => "unperturbed",
            Self::ConceptShift => "concept_shift",
            Self::XImbalance => "x_imbalance",
            Self::YImbalance => "y_imbalance",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftScenario {
    pub kind: ScenarioKind,
    /// How many trailing test records the transformation touches.
    pub affected_tail: usize,
    /// Randomly permute the whole stream after the transformation, making
    /// the shifted records exchangeable with the clean ones.
    pub permute_after: bool,
}

impl ShiftScenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            affected_tail: 500,
            permute_after: true,
        }
    }

    pub fn tail(mut self, affected_tail: usize) -> Self {
        self.affected_tail = affected_tail;
        self
    }

    pub fn permute(mut self, permute_after: bool) -> Self {
        self.permute_after = permute_after;
        self
    }
}

/// Applies a scenario to a test set. The transformation touches exactly the
/// final `affected_tail` records before any permutation; `permute_seed`
/// drives the optional shuffle.
pub fn apply_scenario(
    test: &Dataset,
    scenario: &ShiftScenario,
    permute_seed: u64,
) -> Result<Dataset, ShiftError> {
    let n = test.len();
    if scenario.affected_tail > n {
        return Err(ShiftError::TailTooLong {
            tail: scenario.affected_tail,
            n,
        });
    }
    let tail_start = n - scenario.affected_tail;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let in_tail = i >= tail_start;
        match scenario.kind {
            ScenarioKind::Unperturbed => {}
            ScenarioKind::ConceptShift => {
                if test.k != 2 {
                    return Err(ShiftError::ConceptShiftNotBinary(test.k));
                }
            }
            ScenarioKind::XImbalance => {
                if in_tail && test.x[i][0] >= 0.0 {
                    continue;
                }
            }
            ScenarioKind::YImbalance => {
                if in_tail && test.y[i] == 0 {
                    continue;
                }
            }
        }
        x.push(test.x[i].clone());
        let label = if scenario.kind == ScenarioKind::ConceptShift && in_tail {
            1 - test.y[i]
        } else {
            test.y[i]
        };
        y.push(label);
    }
    if y.is_empty() {
        return Err(ShiftError::EmptyStream);
    }
    if scenario.permute_after {
        let mut rng = ChaCha8Rng::seed_from_u64(permute_seed);
        let mut order: Vec<usize> = (0..y.len()).collect();
        order.shuffle(&mut rng);
        x = order.iter().map(|&i| x[i].clone()).collect();
        y = order.iter().map(|&i| y[i]).collect();
    }
    Ok(Dataset { x, y, k: test.k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shift::{generate, SyntheticSpec};

    fn test_set() -> Dataset {
        let (_, test) = generate(&SyntheticSpec::default()).unwrap();
        test
    }

    #[test]
    fn unperturbed_is_identity_without_permutation() {
        let test = test_set();
        let scenario = ShiftScenario::new(ScenarioKind::Unperturbed).permute(false);
        let stream = apply_scenario(&test, &scenario, 0).unwrap();
        assert_eq!(stream, test);
    }

    #[test]
    fn concept_shift_flips_exactly_the_tail() {
        let test = test_set();
        let scenario = ShiftScenario::new(ScenarioKind::ConceptShift).permute(false);
        let stream = apply_scenario(&test, &scenario, 0).unwrap();
        assert_eq!(stream.len(), test.len());
        for i in 0..test.len() {
            assert_eq!(stream.x[i], test.x[i]);
            if i < test.len() - 500 {
                assert_eq!(stream.y[i], test.y[i]);
            } else {
                assert_eq!(stream.y[i], 1 - test.y[i]);
            }
        }
    }

    #[test]
    fn concept_shift_rejects_multiclass() {
        let (_, test) = generate(&SyntheticSpec {
            k: 3,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let scenario = ShiftScenario::new(ScenarioKind::ConceptShift);
        assert!(matches!(
            apply_scenario(&test, &scenario, 0),
            Err(ShiftError::ConceptShiftNotBinary(3))
        ));
    }

    #[test]
    fn y_imbalance_shrinks_by_tail_zero_count() {
        let test = test_set();
        let zeros_in_tail = test.y[test.len() - 500..]
            .iter()
            .filter(|&&y| y == 0)
            .count();
        let scenario = ShiftScenario::new(ScenarioKind::YImbalance).permute(false);
        let stream = apply_scenario(&test, &scenario, 0).unwrap();
        assert_eq!(stream.len(), test.len() - zeros_in_tail);
        // Prefix untouched.
        for i in 0..test.len() - 500 {
            assert_eq!(stream.x[i], test.x[i]);
            assert_eq!(stream.y[i], test.y[i]);
        }
        assert!(stream.y[test.len() - 500..].iter().all(|&y| y != 0));
    }

    #[test]
    fn x_imbalance_filters_on_first_feature_sign() {
        let test = test_set();
        let scenario = ShiftScenario::new(ScenarioKind::XImbalance).permute(false);
        let stream = apply_scenario(&test, &scenario, 0).unwrap();
        let kept_tail = &stream.x[test.len() - 500..];
        assert!(kept_tail.iter().all(|row| row[0] < 0.0));
        assert!(stream.len() < test.len());
    }

    #[test]
    fn permutation_is_seed_deterministic() {
        let test = test_set();
        let scenario = ShiftScenario::new(ScenarioKind::Unperturbed);
        let a = apply_scenario(&test, &scenario, 7).unwrap();
        let b = apply_scenario(&test, &scenario, 7).unwrap();
        let c = apply_scenario(&test, &scenario, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn oversized_tail_is_rejected() {
        let test = test_set();
        let scenario = ShiftScenario::new(ScenarioKind::Unperturbed).tail(1001);
        assert!(matches!(
            apply_scenario(&test, &scenario, 0),
            Err(ShiftError::TailTooLong { tail: 1001, n: 1000 })
        ));
    }
}
