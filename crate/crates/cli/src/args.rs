//! Subcommand arguments.

use std::path::PathBuf;

use clap::{Args, ValueEnum};

use overuse_core::advantage::DEFAULT_EPSILON;
use overuse_core::classify::DEFAULT_REDUNDANCY_THRESHOLD;
use overuse_core::objective::{DEFAULT_CLIP_HIGH, DEFAULT_CLIP_LOW};
use overuse_core::preference::DEFAULT_DPO_BETA;

#[derive(Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub trajectories: Vec<PathBuf>,
    /// Write the trajectories back out with `correct` filled in.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Aggregate {
    Max,
    Min,
}

#[derive(Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub no_tool: PathBuf,
    #[arg(long)]
    pub with_tool: Option<PathBuf>,
    /// Use only tool-free samples with sample_index below k.
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long = "tool-at-k-agg", value_enum, default_value = "max")]
    pub tool_at_k: Aggregate,
    #[arg(long, default_value = "profiles.jsonl")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long, default_value = "bins.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REDUNDANCY_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value = "labels.jsonl")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct IrrelevanceArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Scheme {
    Balanced,
    OutcomeOnly,
}

#[derive(Args)]
pub struct RewardArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Needed when trajectories lack `correct`.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "balanced")]
    pub scheme: Scheme,
    #[arg(long, default_value_t = 0.05)]
    pub penalty: f64,
    #[arg(long, default_value_t = 16)]
    pub cap: u32,
    #[arg(long, default_value_t = 1.0)]
    pub correct_reward: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub incorrect_reward: f64,
    /// Rollouts with more turns score as incorrect.
    #[arg(long)]
    pub max_turns: Option<usize>,
    #[arg(long, default_value = "rewards.jsonl")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct AdvantagesArgs {
    #[arg(long)]
    pub rewards: PathBuf,
    /// Every query's group must have exactly this many rollouts.
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value = "advantages.jsonl")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DapoArgs {
    #[arg(long)]
    pub tokens: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CLIP_LOW)]
    pub clip_low: f64,
    #[arg(long, default_value_t = DEFAULT_CLIP_HIGH)]
    pub clip_high: f64,
    /// Evaluate the sequence-level GRPO surrogate instead (symmetric clip).
    #[arg(long)]
    pub sequence_level: bool,
    #[arg(long, default_value_t = 0.0)]
    pub kl_coef: f64,
    /// JSONL of {traj_id, kl: [...]} aligned with the token file.
    #[arg(long)]
    pub kl: Option<PathBuf>,
    /// Also write per-token terms to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CurateArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub ceiling: usize,
    #[arg(long, default_value_t = 3)]
    pub floor: usize,
    /// Let incorrect rollouts serve as the rejected side.
    #[arg(long)]
    pub allow_incorrect_rejected: bool,
    #[arg(long, default_value = "pairs.jsonl")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DpoLossArgs {
    #[arg(long)]
    pub pairs_with_h: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DPO_BETA)]
    pub beta: f64,
    #[arg(long, default_value = "dpo_loss.jsonl")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Calibration {
    Multiplicative,
    Additive,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Perceived tool-free accuracy is kappa times the true value.
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, value_enum, default_value = "multiplicative")]
    pub calibration: Calibration,
    /// Subtracted from the true accuracy with --calibration additive.
    #[arg(long, default_value_t = 0.0)]
    pub gap: f64,
    #[arg(long, default_value_t = 0.98)]
    pub p_tool_perceived: f64,
    /// Defaults to the perceived value.
    #[arg(long)]
    pub p_tool_true: Option<f64>,
    #[arg(long = "lambda")]
    pub lambda: f64,
    #[arg(long = "R", default_value_t = 1.0)]
    pub reward: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_mem: f64,
    #[arg(long, default_value_t = 5.0)]
    pub c_tool: f64,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    #[arg(long, requires = "profiles")]
    pub queries: Option<PathBuf>,
    #[arg(long, requires = "queries")]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Render an existing bins.csv or sweep.csv as SVG.
    #[arg(long, conflicts_with_all = ["queries", "profiles", "labels"])]
    pub curves: Option<PathBuf>,
}
