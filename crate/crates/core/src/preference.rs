//! Preference pairs that contrast frugal and excessive tool use, and the DPO
//! loss evaluated on given log-ratios.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Mode, Trajectory};

pub const DEFAULT_DPO_BETA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationConfig {
    /// Chosen rollouts make at most this many calls.
    pub min_calls_ceiling: usize,
    /// Rejected rollouts make at least this many calls.
    pub excess_floor: usize,
    pub require_rejected_correct: bool,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            min_calls_ceiling: 1,
            excess_floor: 3,
            require_rejected_correct: true,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_calls_ceiling >= self.excess_floor {
            return Err(Error::Invalid(format!(
                "min_calls_ceiling ({}) must be below excess_floor ({})",
                self.min_calls_ceiling, self.excess_floor
            )));
        }
        Ok(())
    }
}

/// One line of `pairs.jsonl`. `h_w` / `h_l` are filled in upstream when
/// policy and reference log-probabilities are available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub query_id: String,
    pub chosen_sample_index: u32,
    pub rejected_sample_index: u32,
    pub chosen_calls: usize,
    pub rejected_calls: usize,
    pub rejected_correct: bool,
    pub min_calls_ceiling: usize,
    pub excess_floor: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_l: Option<f64>,
}

/// At most one pair per query, ordered by query id. Only with-tool rollouts
/// take part; truncated rollouts never count as correct.
///
/// Chosen: a correct rollout with at most `min_calls_ceiling` calls, fewest
/// calls first, then lowest sample index. Rejected: a rollout with at least
/// `excess_floor` calls (correct unless `require_rejected_correct` is off),
/// most calls first, then lowest sample index.
pub fn curate_pairs<'a>(
    trajectories: impl IntoIterator<Item = &'a Trajectory>,
    cfg: &CurationConfig,
) -> Result<Vec<PreferencePair>> {
    cfg.validate()?;
    let mut by_query: BTreeMap<&str, (Option<&Trajectory>, Option<&Trajectory>)> = BTreeMap::new();
    for traj in trajectories {
        if traj.mode() != Mode::WithTool {
            continue;
        }
        let calls = traj.tool_call_count();
        let slot = by_query.entry(traj.query_id()).or_default();
        if traj.is_success() && calls <= cfg.min_calls_ceiling {
            let better = slot.0.is_none_or(|c| {
                (calls, traj.sample_index()) < (c.tool_call_count(), c.sample_index())
            });
            if better {
                slot.0 = Some(traj);
            }
        }
        if calls >= cfg.excess_floor && (traj.is_success() || !cfg.require_rejected_correct) {
            let better = slot.1.is_none_or(|r| {
                (calls > r.tool_call_count())
                    || (calls == r.tool_call_count() && traj.sample_index() < r.sample_index())
            });
            if better {
                slot.1 = Some(traj);
            }
        }
    }
    Ok(by_query
        .into_iter()
        .filter_map(|(query_id, slot)| match slot {
            (Some(chosen), Some(rejected)) => Some(PreferencePair {
                query_id: query_id.to_string(),
                chosen_sample_index: chosen.sample_index(),
                rejected_sample_index: rejected.sample_index(),
                chosen_calls: chosen.tool_call_count(),
                rejected_calls: rejected.tool_call_count(),
                rejected_correct: rejected.is_success(),
                min_calls_ceiling: cfg.min_calls_ceiling,
                excess_floor: cfg.excess_floor,
                h_w: None,
                h_l: None,
            }),
            _ => None,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoInputs {
    pub h_w: f64,
    pub h_l: f64,
    pub beta: f64,
}

impl DpoInputs {
    pub fn new(h_w: f64, h_l: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::OutOfRange {
                name: "beta",
                value: beta,
                range: "(0, inf)",
            });
        }
        for (name, value) in [("h_w", h_w), ("h_l", h_l)] {
            if !value.is_finite() {
                return Err(Error::OutOfRange {
                    name,
                    value,
                    range: "finite",
                });
            }
        }
        Ok(DpoInputs { h_w, h_l, beta })
    }

    fn margin(&self) -> f64 {
        self.beta * (self.h_w - self.h_l)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic function, stable on both tails.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(β (h_w - h_l))`.
pub fn dpo_loss(inputs: &DpoInputs) -> f64 {
    softplus(-inputs.margin())
}

/// `(∂L/∂h_w, ∂L/∂h_l)`.
pub fn dpo_gradient(inputs: &DpoInputs) -> (f64, f64) {
    let g = inputs.beta * sigmoid(-inputs.margin());
    (-g, g)
}
