//! Group-relative advantages and the dynamic-sampling group filter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-4;

/// `A_i = (r_i - mean) / (std + epsilon)` with the population standard
/// deviation. Identical rewards give all-zero advantages.
pub fn grpo_advantages(rewards: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::Invalid(format!(
            "a group needs at least 2 rewards, got {}",
            rewards.len()
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
            range: "(0, inf)",
        });
    }
    if let Some(bad) = rewards.iter().find(|r| !r.is_finite()) {
        return Err(Error::Invalid(format!("non-finite reward {bad}")));
    }
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let centered: Vec<f64> = rewards.iter().map(|r| r - mean).collect();
    let std = (centered.iter().map(|c| c * c).sum::<f64>() / n).sqrt();
    let scale = std + epsilon;
    Ok(centered.into_iter().map(|c| c / scale).collect())
}

/// A rollout group's rewards and the advantages derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageGroup {
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub epsilon: f64,
}

impl AdvantageGroup {
    pub fn compute(rewards: Vec<f64>, epsilon: f64) -> Result<Self> {
        let advantages = grpo_advantages(&rewards, epsilon)?;
        Ok(AdvantageGroup {
            rewards,
            advantages,
            epsilon,
        })
    }

    pub fn group_size(&self) -> usize {
        self.rewards.len()
    }
}

/// A group is informative only when it mixes correct and incorrect rollouts.
pub fn is_informative(correct: &[bool]) -> bool {
    let hits = correct.iter().filter(|&&c| c).count();
    0 < hits && hits < correct.len()
}

/// Indices of the groups that survive dynamic sampling. Every group must have
/// exactly `group_size` members.
pub fn dynamic_sampling_filter<G: AsRef<[bool]>>(groups: &[G], group_size: usize) -> Result<Vec<usize>> {
    if group_size == 0 {
        return Err(Error::Invalid("group_size must be positive".into()));
    }
    for (i, g) in groups.iter().enumerate() {
        let len = g.as_ref().len();
        if len != group_size {
            return Err(Error::Invalid(format!(
                "group {i} has {len} members, expected {group_size}"
            )));
        }
    }
    Ok(groups
        .iter()
        .enumerate()
        .filter(|(_, g)| is_informative(g.as_ref()))
        .map(|(i, _)| i)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_member_group() {
        let a = grpo_advantages(&[1.0, -1.0], 1e-4).unwrap();
        // std = 1, (1 - 0) / (1 + 1e-4)
        let expected = 0.999_900_009_999_000_1;
        assert!((a[0] - expected).abs() < 1e-15);
        assert!((a[1] + expected).abs() < 1e-15);
    }

    #[test]
    fn identical_rewards_are_zero() {
        assert_eq!(grpo_advantages(&[0.5, 0.5, 0.5], 1e-4).unwrap(), vec![0.0; 3]);
        assert_eq!(grpo_advantages(&[0.1, 0.1, 0.1], 1e-4).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn three_member_group() {
        // mean 0, population std sqrt(8/3); 2 / sqrt(8/3) = 1.224744871391589
        let a = grpo_advantages(&[2.0, 0.0, -2.0], 1e-12).unwrap();
        assert!((a[0] - 1.224_744_871_391_589).abs() < 1e-9);
        assert_eq!(a[1], 0.0);
        assert!((a[2] + 1.224_744_871_391_589).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(grpo_advantages(&[1.0], 1e-4).is_err());
        assert!(grpo_advantages(&[1.0, 2.0], 0.0).is_err());
        assert!(grpo_advantages(&[1.0, f64::NAN], 1e-4).is_err());
    }

    #[test]
    fn dynamic_sampling_examples() {
        let groups = [
            vec![true, true, true, true],
            vec![false, false, false, false],
            vec![true, false, false, false],
        ];
        assert_eq!(dynamic_sampling_filter(&groups, 4).unwrap(), vec![2]);
        let ragged = [vec![true, false], vec![true, false, true]];
        assert!(dynamic_sampling_filter(&ragged, 2).is_err());
    }

    proptest! {
        #[test]
        fn advantages_are_centered_and_shift_invariant(
            rewards in prop::collection::vec(-5.0f64..5.0, 2..33),
            shift in -10.0f64..10.0,
        ) {
            let a = grpo_advantages(&rewards, DEFAULT_EPSILON).unwrap();
            let mean = a.iter().sum::<f64>() / a.len() as f64;
            prop_assert!(mean.abs() <= 1e-9);
            let shifted: Vec<f64> = rewards.iter().map(|r| r + shift).collect();
            let b = grpo_advantages(&shifted, DEFAULT_EPSILON).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn advantages_are_scale_invariant_as_epsilon_vanishes(
            rewards in prop::collection::vec(-5.0f64..5.0, 2..33),
            scale in 0.1f64..10.0,
        ) {
            let spread = rewards.iter().cloned().fold(f64::MIN, f64::max)
                - rewards.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-3);
            let a = grpo_advantages(&rewards, 1e-12).unwrap();
            let scaled: Vec<f64> = rewards.iter().map(|r| r * scale).collect();
            let b = grpo_advantages(&scaled, 1e-12).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
        }
    }
}
