use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use serde::{Deserialize, Serialize};

use overuse_core::advantage::{grpo_advantages, is_informative};
use overuse_core::classify::{classify_all, irrelevance_detection_score, LabeledTrajectory};
use overuse_core::ingest::{read_jsonl, read_queries, read_trajectories, write_jsonl};
use overuse_core::numfmt::format_g6;
use overuse_core::objective::{dapo_token_objective, grpo_clipped_objective, TokenBatch, TokenSequence};
use overuse_core::preference::{curate_pairs, dpo_gradient, dpo_loss as pair_loss, DpoInputs, PreferencePair};
use overuse_core::profile::{bin_summaries, corpus_tool_at_k, profile_files, ProfileOptions, ToolAtKAgg};
use overuse_core::report;
use overuse_core::reward::{RewardRecord, RewardScheme, RewardConfig};
use overuse_core::svg;
use overuse_core::utility::{sweep_availability, AgentCalibration, CalibrationMap, UtilityParams};
use overuse_core::{KnowledgeProfile, Mode, QueryCorpus, Trajectory};

use crate::args::*;

pub struct Context {
    pub out_dir: PathBuf,
    pub quiet: bool,
    pub seed: Option<u64>,
}

impl Context {
    /// Resolves an output path against `--out-dir`, creating parent directories.
    fn output(&self, path: &Path) -> Result<PathBuf> {
        let full = if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out_dir.join(path)
        };
        if let Some(parent) = full.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(full)
    }

    fn write(&self, path: &Path, contents: &str) -> Result<PathBuf> {
        let full = self.output(path)?;
        fs::write(&full, contents).with_context(|| format!("writing {}", full.display()))?;
        Ok(full)
    }

    fn write_jsonl<T: Serialize>(&self, path: &Path, items: &[T]) -> Result<PathBuf> {
        let full = self.output(path)?;
        write_jsonl(&full, items)?;
        Ok(full)
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

fn load_trajectories(path: &Path, corpus: Option<&QueryCorpus>) -> Result<Vec<Trajectory>> {
    Ok(read_trajectories(path, corpus)?)
}

fn load_corpus(path: Option<&Path>) -> Result<Option<QueryCorpus>> {
    path.map(read_queries).transpose().map_err(Into::into)
}

pub fn ingest(ctx: &Context, a: &IngestArgs) -> Result<()> {
    let corpus = read_queries(&a.queries)?;
    ctx.say(format!("queries: {}", corpus.len()));
    if a.out.is_some() && a.trajectories.is_empty() {
        bail!("--out needs at least one --trajectories file");
    }
    let mut all = Vec::new();
    for path in &a.trajectories {
        let trajs = load_trajectories(path, Some(&corpus))?;
        let with_tool = trajs.iter().filter(|t| t.mode() == Mode::WithTool).count();
        let truncated = trajs.iter().filter(|t| t.is_truncated()).count();
        let correct = trajs.iter().filter(|t| t.correct()).count();
        ctx.say(format!(
            "{}: {} trajectories ({} with_tool, {} correct, {} truncated)",
            path.display(),
            trajs.len(),
            with_tool,
            correct,
            truncated
        ));
        all.extend(trajs);
    }
    if let Some(out) = &a.out {
        let records: Vec<_> = all
            .iter()
            .map(|t| {
                let mut r = t.to_record();
                r.correct = Some(t.correct());
                r
            })
            .collect();
        let path = ctx.write_jsonl(out, &records)?;
        ctx.say(format!("wrote {}", path.display()));
    }
    Ok(())
}

pub fn profile(ctx: &Context, a: &ProfileArgs) -> Result<()> {
    let corpus = read_queries(&a.queries)?;
    let options = ProfileOptions {
        tool_at_k: match a.tool_at_k {
            Aggregate::Max => ToolAtKAgg::Max,
            Aggregate::Min => ToolAtKAgg::Min,
        },
        k_limit: a.k,
    };
    let set = profile_files(&corpus, &a.no_tool, a.with_tool.as_deref(), options)?;
    if set.profiles.is_empty() {
        bail!("no query has tool-free samples");
    }
    let path = ctx.write_jsonl(&a.out, &set.profiles)?;
    ctx.say(format!(
        "profiled {} queries, skipped {} without tool-free samples",
        set.profiles.len(),
        set.skipped.len()
    ));
    if !set.skipped.is_empty() {
        ctx.say(format!("skipped: {}", set.skipped.join(" ")));
    }
    if let Some(t) = corpus_tool_at_k(&set.profiles) {
        ctx.say(format!("tool@k: {}", format_g6(t)));
    }
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}

pub fn curve(ctx: &Context, a: &CurveArgs) -> Result<()> {
    let profiles: Vec<KnowledgeProfile> = read_jsonl(&a.profiles)?;
    let bins = bin_summaries(&profiles);
    let path = ctx.write(&a.out, &report::write_bins_csv(&bins))?;
    ctx.say(format!("wrote {}", path.display()));
    if let Some(svg_path) = &a.svg {
        let path = ctx.write(svg_path, &svg::bins_svg(&bins))?;
        ctx.say(format!("wrote {}", path.display()));
    }
    Ok(())
}

pub fn classify(ctx: &Context, a: &ClassifyArgs) -> Result<()> {
    let corpus = read_queries(&a.queries)?;
    let trajs = load_trajectories(&a.trajectories, Some(&corpus))?;
    let profiles: Vec<KnowledgeProfile> = read_jsonl(&a.profiles)?;
    let labels = classify_all(&trajs, &profiles, &corpus, a.threshold)?;
    let path = ctx.write_jsonl(&a.out, &labels)?;
    for (name, count) in report::overuse_counts(&labels) {
        ctx.say(format!("{name}: {count}"));
    }
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}

pub fn irrelevance(_ctx: &Context, a: &IrrelevanceArgs) -> Result<()> {
    let corpus = read_queries(&a.queries)?;
    let trajs: Vec<Trajectory> = load_trajectories(&a.trajectories, Some(&corpus))?
        .into_iter()
        .filter(|t| t.mode() == Mode::WithTool)
        .collect();
    let score = irrelevance_detection_score(&trajs, &corpus)?;
    // the score is the command's result, so it is printed even with --quiet
    println!("{score}");
    Ok(())
}

pub fn reward(ctx: &Context, a: &RewardArgs) -> Result<()> {
    let cfg = RewardConfig {
        correct_reward: a.correct_reward,
        incorrect_reward: a.incorrect_reward,
        per_call_penalty: a.penalty,
        call_cap: a.cap,
        scheme: match a.scheme {
            Scheme::Balanced => RewardScheme::Balanced,
            Scheme::OutcomeOnly => RewardScheme::OutcomeOnly,
        },
        max_turns: a.max_turns,
    };
    cfg.validate()?;
    let corpus = load_corpus(a.queries.as_deref())?;
    let trajs = load_trajectories(&a.trajectories, corpus.as_ref())?;
    let records: Vec<RewardRecord> = trajs.iter().map(|t| RewardRecord::score(t, &cfg)).collect();
    let path = ctx.write_jsonl(&a.out, &records)?;
    if !records.is_empty() {
        let mean = records.iter().map(|r| r.reward).sum::<f64>() / records.len() as f64;
        ctx.say(format!("rollouts: {}, mean reward: {}", records.len(), format_g6(mean)));
    }
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}

/// One line of `advantages.jsonl`.
#[derive(Serialize)]
struct AdvantageRecord<'a> {
    query_id: &'a str,
    sample_index: u32,
    reward: f64,
    advantage: f64,
    /// Whether the group survives dynamic sampling.
    retained: bool,
}

pub fn advantages(ctx: &Context, a: &AdvantagesArgs) -> Result<()> {
    let rewards: Vec<RewardRecord> = read_jsonl(&a.rewards)?;
    if rewards.is_empty() {
        bail!("{}: no reward records", a.rewards.display());
    }
    // groups in order of first appearance, members by sample index
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&RewardRecord>> = HashMap::new();
    for r in &rewards {
        groups
            .entry(r.query_id.as_str())
            .or_insert_with(|| {
                order.push(r.query_id.as_str());
                Vec::new()
            })
            .push(r);
    }
    let mut out = Vec::with_capacity(rewards.len());
    let mut retained_groups = 0usize;
    for query_id in &order {
        let members = groups.get_mut(query_id).expect("grouped above");
        members.sort_by_key(|r| r.sample_index);
        if let Some(g) = a.group_size {
            if members.len() != g {
                bail!("query `{query_id}` has {} rollouts, expected --group-size {g}", members.len());
            }
        }
        let values: Vec<f64> = members.iter().map(|r| r.reward).collect();
        let adv = grpo_advantages(&values, a.epsilon)
            .with_context(|| format!("query `{query_id}`"))?;
        let correct: Vec<bool> = members.iter().map(|r| r.correct).collect();
        let retained = is_informative(&correct);
        retained_groups += usize::from(retained);
        for (r, advantage) in members.iter().zip(adv) {
            out.push(AdvantageRecord {
                query_id,
                sample_index: r.sample_index,
                reward: r.reward,
                advantage,
                retained,
            });
        }
    }
    let path = ctx.write_jsonl(&a.out, &out)?;
    ctx.say(format!(
        "groups: {}, retained by dynamic sampling: {}",
        order.len(),
        retained_groups
    ));
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KlLine {
    traj_id: String,
    kl: Vec<f64>,
}

#[derive(Serialize)]
struct TermsLine<'a> {
    traj_id: &'a str,
    terms: &'a [f64],
}

pub fn dapo_objective(ctx: &Context, a: &DapoArgs) -> Result<()> {
    let sequences: Vec<TokenSequence> = read_jsonl(&a.tokens)?;
    let batch = TokenBatch::new(sequences, a.clip_low, a.clip_high)?;
    if a.sequence_level {
        let kl = match &a.kl {
            Some(path) => {
                let lines: Vec<KlLine> = read_jsonl(path)?;
                if lines.len() != batch.sequences.len() {
                    bail!("{}: {} KL lines for {} sequences", path.display(), lines.len(), batch.sequences.len());
                }
                for (k, s) in lines.iter().zip(&batch.sequences) {
                    if k.traj_id != s.traj_id {
                        bail!("{}: KL line for `{}` where `{}` was expected", path.display(), k.traj_id, s.traj_id);
                    }
                }
                Some(lines.into_iter().map(|l| l.kl).collect::<Vec<_>>())
            }
            None => None,
        };
        let value = grpo_clipped_objective(&batch, a.kl_coef, kl.as_deref())?;
        println!("{}", serde_json::json!({ "objective": value, "sequences": batch.sequences.len() }));
        return Ok(());
    }
    if a.kl.is_some() || a.kl_coef != 0.0 {
        bail!("KL terms apply only with --sequence-level");
    }
    let result = dapo_token_objective(&batch)?;
    println!(
        "{}",
        serde_json::json!({
            "objective": result.value,
            "token_count": result.token_count,
            "clamped_log_ratios": result.clamped_log_ratios,
            "clipped_tokens": result.clipped_tokens,
        })
    );
    if let Some(out) = &a.out {
        let lines: Vec<TermsLine> = batch
            .sequences
            .iter()
            .zip(&result.terms)
            .map(|(s, t)| TermsLine {
                traj_id: &s.traj_id,
                terms: t,
            })
            .collect();
        let path = ctx.write_jsonl(out, &lines)?;
        ctx.say(format!("wrote {}", path.display()));
    }
    Ok(())
}

pub fn curate_dpo(ctx: &Context, a: &CurateArgs) -> Result<()> {
    let cfg = overuse_core::preference::CurationConfig {
        min_calls_ceiling: a.ceiling,
        excess_floor: a.floor,
        require_rejected_correct: !a.allow_incorrect_rejected,
    };
    let corpus = load_corpus(a.queries.as_deref())?;
    let trajs = load_trajectories(&a.trajectories, corpus.as_ref())?;
    let pairs = curate_pairs(&trajs, &cfg)?;
    let path = ctx.write_jsonl(&a.out, &pairs)?;
    ctx.say(format!("pairs: {}", pairs.len()));
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}

#[derive(Serialize)]
struct LossLine<'a> {
    query_id: &'a str,
    chosen_sample_index: u32,
    rejected_sample_index: u32,
    loss: f64,
    grad_h_w: f64,
    grad_h_l: f64,
}

pub fn dpo_loss(ctx: &Context, a: &DpoLossArgs) -> Result<()> {
    let pairs: Vec<PreferencePair> = read_jsonl(&a.pairs_with_h)?;
    if pairs.is_empty() {
        bail!("{}: no pairs", a.pairs_with_h.display());
    }
    let mut lines = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let (Some(h_w), Some(h_l)) = (p.h_w, p.h_l) else {
            bail!("{} line {}: pair for `{}` lacks h_w/h_l", a.pairs_with_h.display(), i + 1, p.query_id);
        };
        let inputs = DpoInputs::new(h_w, h_l, a.beta)
            .with_context(|| format!("{} line {}", a.pairs_with_h.display(), i + 1))?;
        let (grad_h_w, grad_h_l) = dpo_gradient(&inputs);
        lines.push(LossLine {
            query_id: &p.query_id,
            chosen_sample_index: p.chosen_sample_index,
            rejected_sample_index: p.rejected_sample_index,
            loss: pair_loss(&inputs),
            grad_h_w,
            grad_h_l,
        });
    }
    let mean = lines.iter().map(|l| l.loss).sum::<f64>() / lines.len() as f64;
    let path = ctx.write_jsonl(&a.out, &lines)?;
    println!("{}", serde_json::json!({ "pairs": lines.len(), "mean_loss": mean }));
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}

pub fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<()> {
    let Some(seed) = ctx.seed else {
        bail!("simulate needs --seed for a reproducible sweep");
    };
    let map = match a.calibration {
        Calibration::Multiplicative => CalibrationMap::Multiplicative { kappa: a.kappa },
        Calibration::Additive => CalibrationMap::Additive { gap: a.gap },
    };
    let template = AgentCalibration::new(0.0, a.p_tool_true.unwrap_or(a.p_tool_perceived), map, a.p_tool_perceived)?;
    let params = UtilityParams::new(a.reward, a.lambda, a.c_mem, a.c_tool)?;
    let sweep = sweep_availability(&template, &params, a.samples, seed)?;
    let path = ctx.write(&a.out, &report::write_sweep_csv(&sweep))?;
    ctx.say(format!("wrote {}", path.display()));
    if let Some(svg_path) = &a.svg {
        let path = ctx.write(svg_path, &svg::sweep_svg(&sweep))?;
        ctx.say(format!("wrote {}", path.display()));
    }
    Ok(())
}

pub fn report(ctx: &Context, a: &ReportArgs) -> Result<()> {
    if let Some(curves) = &a.curves {
        return report_curves(ctx, curves);
    }
    let (Some(queries), Some(profiles)) = (&a.queries, &a.profiles) else {
        bail!("report needs --queries and --profiles, or --curves");
    };
    let corpus = read_queries(queries)?;
    let profiles: Vec<KnowledgeProfile> = read_jsonl(profiles)?;
    let rows = report::table1(&corpus, &profiles)?;
    let bins = bin_summaries(&profiles);
    let mut written = vec![
        ctx.write(Path::new("table1.csv"), &report::write_table1_csv(&rows))?,
        ctx.write(Path::new("bins.csv"), &report::write_bins_csv(&bins))?,
        ctx.write(Path::new("bins.svg"), &svg::bins_svg(&bins))?,
    ];
    if let Some(labels) = &a.labels {
        let labels: Vec<LabeledTrajectory> = read_jsonl(labels)?;
        written.push(ctx.write(Path::new("overuse.csv"), &report::write_overuse_csv(&labels)?)?);
    }
    for path in written {
        ctx.say(format!("wrote {}", path.display()));
    }
    Ok(())
}

/// Re-renders a bins.csv or sweep.csv, chosen by its header.
fn report_curves(ctx: &Context, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header = text.lines().next().unwrap_or_default().trim_end();
    let svg = if header == report::BINS_HEADER {
        svg::bins_svg(&report::parse_bins_csv(&text).with_context(|| path.display().to_string())?)
    } else if header == report::SWEEP_HEADER {
        svg::sweep_svg(&report::parse_sweep_csv(&text).with_context(|| path.display().to_string())?)
    } else {
        bail!("{}: not a bins.csv or sweep.csv file (header `{header}`)", path.display());
    };
    let stem = path.file_stem().map_or("curves".into(), |s| s.to_string_lossy().into_owned());
    let out = ctx.write(Path::new(&format!("{stem}.svg")), &svg)?;
    ctx.say(format!("wrote {}", out.display()));
    Ok(())
}
