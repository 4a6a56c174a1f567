//! Outcome and outcome-efficiency rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardScheme {
    OutcomeOnly,
    #[default]
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub correct_reward: f64,
    pub incorrect_reward: f64,
    /// Charged per tool call, on correct responses only.
    pub per_call_penalty: f64,
    /// Calls beyond this count are not penalized further.
    pub call_cap: u32,
    pub scheme: RewardScheme,
    /// Rollouts with more turns than this are scored as incorrect.
    pub max_turns: Option<usize>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            correct_reward: 1.0,
            incorrect_reward: -1.0,
            per_call_penalty: 0.05,
            call_cap: 16,
            scheme: RewardScheme::Balanced,
            max_turns: None,
        }
    }
}

impl RewardConfig {
    pub fn outcome_only() -> Self {
        RewardConfig {
            scheme: RewardScheme::OutcomeOnly,
            ..Default::default()
        }
    }

    /// The full penalty must never push a correct response below an
    /// incorrect one.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.correct_reward, self.incorrect_reward, self.per_call_penalty];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("reward parameters must be finite".into()));
        }
        if self.per_call_penalty < 0.0 {
            return Err(Error::OutOfRange {
                name: "per_call_penalty",
                value: self.per_call_penalty,
                range: "[0, inf)",
            });
        }
        if self.call_cap == 0 {
            return Err(Error::Invalid("call_cap must be positive".into()));
        }
        let max_penalty = self.per_call_penalty * f64::from(self.call_cap);
        if max_penalty > self.correct_reward - self.incorrect_reward {
            return Err(Error::Invalid(format!(
                "per_call_penalty x call_cap = {max_penalty} exceeds correct_reward - incorrect_reward = {}",
                self.correct_reward - self.incorrect_reward
            )));
        }
        Ok(())
    }
}

/// Scores a rollout. Truncated and overlong rollouts count as incorrect.
pub fn reward(traj: &Trajectory, cfg: &RewardConfig) -> f64 {
    let within_length = cfg.max_turns.is_none_or(|m| traj.turns().len() <= m);
    if !(traj.is_success() && within_length) {
        return cfg.incorrect_reward;
    }
    match cfg.scheme {
        RewardScheme::OutcomeOnly => cfg.correct_reward,
        RewardScheme::Balanced => {
            let charged = traj.tool_call_count().min(cfg.call_cap as usize) as f64;
            snap_decimal(cfg.correct_reward - cfg.per_call_penalty * charged)
        }
    }
}

/// Rounds to 12 decimal places so decimal-specified rewards come out as the
/// nearest double to their decimal value (1 - 0.05 * 7 gives 0.65, not
/// 0.6499999999999999).
fn snap_decimal(x: f64) -> f64 {
    const SCALE: f64 = 1e12;
    if x.abs() < 1e3 {
        (x * SCALE).round() / SCALE
    } else {
        x
    }
}

/// One line of `rewards.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub query_id: String,
    pub sample_index: u32,
    pub tool_calls: usize,
    pub correct: bool,
    pub reward: f64,
}

impl RewardRecord {
    pub fn score(traj: &Trajectory, cfg: &RewardConfig) -> Self {
        RewardRecord {
            query_id: traj.query_id().to_string(),
            sample_index: traj.sample_index(),
            tool_calls: traj.tool_call_count(),
            correct: traj.is_success(),
            reward: reward(traj, cfg),
        }
    }
}
