mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand};

use args::*;

#[derive(Parser)]
#[command(name = "overuse-lab", version, about = "Tool-overuse analysis for tool-integrated reasoning logs")]
struct Cli {
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Seed for stochastic subcommands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate query and trajectory files and fill in correctness.
    Ingest(IngestArgs),
    /// Per-query availability profiles from tool-free and with-tool rollouts.
    Profile(ProfileArgs),
    /// Per-bin knowledge/behavior summaries.
    Curve(CurveArgs),
    /// Label rollouts as no_tool, irrelevant, redundant or justified.
    Classify(ClassifyArgs),
    /// Fraction of rollouts that abstain when no tool is relevant.
    Irrelevance(IrrelevanceArgs),
    /// Score rollouts with the outcome or outcome-efficiency reward.
    Reward(RewardArgs),
    /// Group-relative advantages and the dynamic-sampling filter.
    Advantages(AdvantagesArgs),
    /// Clipped surrogate objective over logged token log-probabilities.
    DapoObjective(DapoArgs),
    /// Build preference pairs contrasting frugal and heavy tool use.
    CurateDpo(CurateArgs),
    /// DPO loss and gradients for pairs carrying h_w / h_l.
    DpoLoss(DpoLossArgs),
    /// Sweep the expected-utility agent over availability bins.
    Simulate(SimulateArgs),
    /// Table, curve and label-count reports with SVG charts.
    Report(ReportArgs),
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("OVERUSE_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("OVERUSE_LAB_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    let ctx = commands::Context {
        out_dir: cli.out_dir,
        quiet: cli.quiet,
        seed: cli.seed,
    };
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, a),
        Command::Profile(a) => commands::profile(&ctx, a),
        Command::Curve(a) => commands::curve(&ctx, a),
        Command::Classify(a) => commands::classify(&ctx, a),
        Command::Irrelevance(a) => commands::irrelevance(&ctx, a),
        Command::Reward(a) => commands::reward(&ctx, a),
        Command::Advantages(a) => commands::advantages(&ctx, a),
        Command::DapoObjective(a) => commands::dapo_objective(&ctx, a),
        Command::CurateDpo(a) => commands::curate_dpo(&ctx, a),
        Command::DpoLoss(a) => commands::dpo_loss(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_target(false)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
