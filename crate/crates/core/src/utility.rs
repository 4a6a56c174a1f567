//! Expected-utility model of the answer-from-memory vs call-a-tool choice,
//! with calibrated and miscalibrated agents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::profile::BIN_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityParams {
    /// Reward for a correct response.
    pub reward: f64,
    /// Weight on inference cost.
    pub lambda: f64,
    pub c_mem: f64,
    pub c_tool: f64,
}

impl UtilityParams {
    pub fn new(reward: f64, lambda: f64, c_mem: f64, c_tool: f64) -> Result<Self> {
        let p = UtilityParams {
            reward,
            lambda,
            c_mem,
            c_tool,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("reward", self.reward, self.reward > 0.0, "(0, inf)"),
            ("lambda", self.lambda, self.lambda >= 0.0, "[0, inf)"),
            ("c_mem", self.c_mem, self.c_mem >= 0.0, "[0, inf)"),
            ("c_tool", self.c_tool, self.c_tool >= 0.0, "[0, inf)"),
        ];
        for (name, value, ok, range) in checks {
            if !(ok && value.is_finite()) {
                return Err(Error::OutOfRange { name, value, range });
            }
        }
        Ok(())
    }

    pub fn cost(&self, action: Action) -> f64 {
        match action {
            Action::Mem => self.c_mem,
            Action::Tool => self.c_tool,
        }
    }

    /// `(λ / R) · (c_tool − c_mem)`: the reliability gain a tool call must beat.
    pub fn cost_threshold(&self) -> f64 {
        (self.lambda / self.reward) * (self.c_tool - self.c_mem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Mem,
    Tool,
}

/// `p · R − λ · C(action)`.
pub fn expected_utility(action: Action, p_correct: f64, params: &UtilityParams) -> Result<f64> {
    check_probability("p_correct", p_correct)?;
    Ok(p_correct * params.reward - params.lambda * params.cost(action))
}

/// How an agent perceives its own tool-free accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalibrationMap {
    /// `p̂ = κ · p`.
    Multiplicative { kappa: f64 },
    /// `p̂ = p − gap`, clamped at zero.
    Additive { gap: f64 },
}

impl CalibrationMap {
    pub fn identity() -> Self {
        CalibrationMap::Multiplicative { kappa: 1.0 }
    }

    pub fn apply(&self, p: f64) -> f64 {
        match *self {
            CalibrationMap::Multiplicative { kappa } => (kappa * p).clamp(0.0, 1.0),
            CalibrationMap::Additive { gap } => (p - gap).clamp(0.0, 1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CalibrationMap::Multiplicative { kappa } => check_probability("kappa_mem", kappa),
            CalibrationMap::Additive { gap } => check_probability("gap", gap),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentCalibration {
    pub p_mem_true: f64,
    pub p_tool_true: f64,
    pub mem_map: CalibrationMap,
    pub p_tool_perceived: f64,
}

impl AgentCalibration {
    /// An agent that perceives both probabilities correctly.
    pub fn calibrated(p_mem: f64, p_tool: f64) -> Result<Self> {
        Self::new(p_mem, p_tool, CalibrationMap::identity(), p_tool)
    }

    pub fn new(
        p_mem_true: f64,
        p_tool_true: f64,
        mem_map: CalibrationMap,
        p_tool_perceived: f64,
    ) -> Result<Self> {
        let cal = AgentCalibration {
            p_mem_true,
            p_tool_true,
            mem_map,
            p_tool_perceived,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_mem_true", self.p_mem_true)?;
        check_probability("p_tool_true", self.p_tool_true)?;
        check_probability("p_tool_perceived", self.p_tool_perceived)?;
        self.mem_map.validate()
    }

    pub fn p_mem_perceived(&self) -> f64 {
        self.mem_map.apply(self.p_mem_true)
    }

    /// `(p_mem, p_tool)` as the agent sees them, or the true values.
    pub fn probabilities(&self, use_perceived: bool) -> (f64, f64) {
        if use_perceived {
            (self.p_mem_perceived(), self.p_tool_perceived)
        } else {
            (self.p_mem_true, self.p_tool_true)
        }
    }
}

/// Calls the tool iff `p_tool − p_mem > (λ/R)·(c_tool − c_mem)`. Ties go to
/// memory.
pub fn decide(cal: &AgentCalibration, params: &UtilityParams, use_perceived: bool) -> Action {
    let (p_mem, p_tool) = cal.probabilities(use_perceived);
    if p_tool - p_mem > params.cost_threshold() {
        Action::Tool
    } else {
        Action::Mem
    }
}

/// The `(lo, hi]` range of tool-free accuracy covered by an availability
/// bin. Bin 0 is the single point 0.
pub fn bin_interval(bin: usize) -> Result<(f64, f64)> {
    match bin {
        0 => Ok((0.0, 0.0)),
        b if b < BIN_COUNT => Ok(((b - 1) as f64 / 10.0, b as f64 / 10.0)),
        b => Err(Error::Invalid(format!("bin {b} outside 0..{BIN_COUNT}"))),
    }
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepBin {
    pub bin_index: u8,
    pub tool_rate: f64,
    /// Mean of `p̂_tool − p̂_mem` over the bin's draws.
    pub mean_perceived_gap: f64,
}

/// For every availability bin, draws `samples_per_bin` true tool-free
/// accuracies uniformly from the bin, applies the template's calibration and
/// records how often the agent calls the tool. Each bin has its own ChaCha8
/// stream derived from `seed`, so the result does not depend on scheduling.
pub fn sweep_availability(
    template: &AgentCalibration,
    params: &UtilityParams,
    samples_per_bin: usize,
    seed: u64,
) -> Result<Vec<SweepBin>> {
    if samples_per_bin == 0 {
        return Err(Error::Invalid("samples_per_bin must be at least 1".into()));
    }
    template.validate()?;
    params.validate()?;
    (0..BIN_COUNT)
        .into_par_iter()
        .map(|bin| {
            let (lo, hi) = bin_interval(bin)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(bin as u64);
            let mut tools = 0usize;
            let mut gap_sum = 0.0;
            for _ in 0..samples_per_bin {
                // (lo, hi]: hi − u·(hi − lo) with u in [0, 1)
                let u: f64 = rng.gen();
                let p_mem = hi - u * (hi - lo);
                let agent = AgentCalibration {
                    p_mem_true: p_mem,
                    ..*template
                };
                if decide(&agent, params, true) == Action::Tool {
                    tools += 1;
                }
                let (m, t) = agent.probabilities(true);
                gap_sum += t - m;
            }
            Ok(SweepBin {
                bin_index: bin as u8,
                tool_rate: tools as f64 / samples_per_bin as f64,
                mean_perceived_gap: gap_sum / samples_per_bin as f64,
            })
        })
        .collect()
}

/// Checks the limit behaviour as the cost weight vanishes: for a fixed gain
/// `delta_p > 0`, every `λ` in the sequence below `delta_p · R / delta_c`
/// must lead to a tool call. The sequence must be strictly decreasing,
/// nonnegative, and reach below that threshold.
pub fn rational_overuse_limit_check(
    delta_p: f64,
    delta_c: f64,
    reward: f64,
    lambdas: &[f64],
) -> Result<bool> {
    if !(delta_p > 0.0 && delta_p <= 1.0) {
        return Err(Error::OutOfRange {
            name: "delta_p",
            value: delta_p,
            range: "(0, 1]",
        });
    }
    if !delta_c.is_finite() {
        return Err(Error::Invalid("delta_c must be finite".into()));
    }
    if lambdas.is_empty() {
        return Err(Error::Empty("lambda sequence"));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Invalid("lambda sequence must be strictly decreasing".into()));
    }
    let (c_mem, c_tool) = if delta_c >= 0.0 { (0.0, delta_c) } else { (-delta_c, 0.0) };
    let cal = AgentCalibration::calibrated(0.0, delta_p)?;
    let threshold = if delta_c > 0.0 {
        delta_p * reward / delta_c
    } else {
        f64::INFINITY
    };
    let mut reached = false;
    for &lambda in lambdas {
        let params = UtilityParams::new(reward, lambda, c_mem, c_tool)?;
        if lambda < threshold {
            reached = true;
            if decide(&cal, &params, false) != Action::Tool {
                return Ok(false);
            }
        }
    }
    Ok(reached)
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}
