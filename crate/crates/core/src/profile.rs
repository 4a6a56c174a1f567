//! Internal-knowledge availability statistics.
//!
//! For each query the profiler estimates availability as tool-free avg@k,
//! measures disagreement between tool-free answers as Shannon entropy, assigns
//! one of eleven availability bins, and summarises the with-tool rollouts
//! (accuracy, mean calls, tool@k).
//!
//! Bins: bin 0 holds availability exactly 0; bin `i` in 1..=10 holds
//! `((i-1)/10, i/10]`.

use std::borrow::Cow;
use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::answer::answer_key;
use crate::answer::answers_equivalent;
use crate::error::{Error, Result};
use crate::ingest::{open, parse_batch, scan_lines, with_path, Line, QueryCorpus};
use crate::trajectory::{turn_stats, Mode, Trajectory, TurnKind};

pub const BIN_COUNT: usize = 11;
/// Sample count the simple/complex protocol is defined on.
pub const PARTITION_K: usize = 8;
pub const SIMPLE_THRESHOLD: f64 = 0.5;

/// Fraction of successful outcomes.
pub fn avg_at_k(outcomes: &[bool]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Empty("outcomes"));
    }
    let hits = outcomes.iter().filter(|&&o| o).count();
    Ok(hits as f64 / outcomes.len() as f64)
}

/// Shannon entropy in bits of the empirical distribution of normalized answers.
pub fn answer_entropy<S: AsRef<str>>(answers: &[S]) -> Result<f64> {
    if answers.is_empty() {
        return Err(Error::Empty("answers"));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for a in answers {
        *counts.entry(answer_key(a.as_ref())).or_default() += 1;
    }
    Ok(entropy_from_counts(counts.into_values().collect()))
}

/// Entropy of a count vector. Counts are sorted first so the floating-point
/// sum does not depend on hash order.
pub(crate) fn entropy_from_counts(mut counts: Vec<u64>) -> f64 {
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Maps an availability value to its bin.
pub fn assign_bin(avg: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&avg) {
        return Err(Error::OutOfRange {
            name: "avg_at_k",
            value: avg,
            range: "[0, 1]",
        });
    }
    if avg == 0.0 {
        return Ok(0);
    }
    // Snap values that are a rounding error away from a bin edge, so 0.3
    // lands in bin 3 rather than bin 4.
    let scaled = avg * 10.0;
    let nearest = scaled.round();
    let upper = if (scaled - nearest).abs() < 1e-9 {
        nearest
    } else {
        scaled.ceil()
    };
    Ok(upper.clamp(1.0, 10.0) as u8)
}

/// Exact bin of `hits / total` using integer arithmetic.
pub fn bin_from_counts(hits: u64, total: u64) -> u8 {
    debug_assert!(total > 0 && hits <= total);
    if hits == 0 {
        0
    } else {
        (10 * hits).div_ceil(total) as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Simple,
    Complex,
}

/// Simple iff tool-free avg@8 is at least 0.5. Requires exactly eight samples.
pub fn partition_simple_complex(profile: &KnowledgeProfile) -> Result<Difficulty> {
    if profile.k_no_tool != PARTITION_K {
        return Err(Error::Invalid(format!(
            "query `{}`: simple/complex partition needs {PARTITION_K} tool-free samples, found {}",
            profile.query_id, profile.k_no_tool
        )));
    }
    Ok(if profile.avg_at_k >= SIMPLE_THRESHOLD {
        Difficulty::Simple
    } else {
        Difficulty::Complex
    })
}

/// How tool@k aggregates call counts over a query's successful rollouts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolAtKAgg {
    #[default]
    Max,
    Min,
}

impl ToolAtKAgg {
    fn combine(self, current: Option<u32>, calls: u32) -> Option<u32> {
        Some(match (self, current) {
            (_, None) => calls,
            (ToolAtKAgg::Max, Some(c)) => c.max(calls),
            (ToolAtKAgg::Min, Some(c)) => c.min(calls),
        })
    }
}

/// Per-query tool@k: the max (or min) call count over successful with-tool
/// rollouts; `None` when no rollout succeeded.
pub fn tool_at_k(trajectories: &[Trajectory], agg: ToolAtKAgg) -> Result<Option<u32>> {
    let Some(first) = trajectories.first() else {
        return Ok(None);
    };
    let mut best = None;
    for traj in trajectories {
        if traj.query_id() != first.query_id() {
            return Err(Error::QueryMismatch {
                expected: first.query_id().to_string(),
                found: traj.query_id().to_string(),
            });
        }
        if traj.mode() != Mode::WithTool {
            return Err(Error::Invalid(format!(
                "tool@k needs with_tool rollouts; query `{}` sample {} is no_tool",
                traj.query_id(),
                traj.sample_index()
            )));
        }
        if traj.is_success() {
            best = agg.combine(best, traj.tool_call_count() as u32);
        }
    }
    Ok(best)
}

/// Corpus tool@k: mean of per-query values over queries that have one.
pub fn corpus_tool_at_k(profiles: &[KnowledgeProfile]) -> Option<f64> {
    mean(profiles.iter().filter_map(|p| p.tool_at_k.map(f64::from)))
}

/// Availability statistics for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeProfile {
    pub query_id: String,
    pub k_no_tool: usize,
    pub avg_at_k: f64,
    pub entropy_bits: f64,
    pub bin_index: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_with_tool: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_at_k_with_tool: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_tool_calls: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_at_k: Option<u32>,
}

impl KnowledgeProfile {
    pub fn has_with_tool(&self) -> bool {
        self.k_with_tool.is_some()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProfileOptions {
    pub tool_at_k: ToolAtKAgg,
    /// Use only tool-free samples with `sample_index < k`.
    pub k_limit: Option<u32>,
}

/// Profiles in corpus order, plus queries skipped for lack of tool-free samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileSet {
    pub profiles: Vec<KnowledgeProfile>,
    pub skipped: Vec<String>,
}

/// Everything the profiler needs from one rollout.
#[derive(Debug, Clone)]
struct Sample {
    query: usize,
    mode: Mode,
    sample_index: u32,
    tool_calls: u32,
    success: bool,
    answer_key: Option<String>,
}

#[derive(Debug, Default, Clone)]
struct QueryAcc {
    no_tool: u64,
    no_tool_hits: u64,
    answers: HashMap<String, u64>,
    with_tool: u64,
    with_tool_hits: u64,
    with_tool_calls: u64,
    tool_at_k: Option<u32>,
}

/// Accumulates per-query statistics one rollout at a time.
#[derive(Debug)]
struct ProfileBuilder<'c> {
    corpus: &'c QueryCorpus,
    options: ProfileOptions,
    acc: Vec<QueryAcc>,
}

impl<'c> ProfileBuilder<'c> {
    fn new(corpus: &'c QueryCorpus, options: ProfileOptions) -> Self {
        ProfileBuilder {
            corpus,
            options,
            acc: vec![QueryAcc::default(); corpus.len()],
        }
    }

    fn add(&mut self, sample: Sample) {
        let acc = &mut self.acc[sample.query];
        match sample.mode {
            Mode::NoTool => {
                if self
                    .options
                    .k_limit
                    .is_some_and(|k| sample.sample_index >= k)
                {
                    return;
                }
                acc.no_tool += 1;
                acc.no_tool_hits += u64::from(sample.success);
                if let Some(key) = sample.answer_key {
                    *acc.answers.entry(key).or_default() += 1;
                }
            }
            Mode::WithTool => {
                acc.with_tool += 1;
                acc.with_tool_hits += u64::from(sample.success);
                acc.with_tool_calls += u64::from(sample.tool_calls);
                if sample.success {
                    acc.tool_at_k = self.options.tool_at_k.combine(acc.tool_at_k, sample.tool_calls);
                }
            }
        }
    }

    fn finish(self) -> ProfileSet {
        let mut set = ProfileSet::default();
        for (query, acc) in self.corpus.records().iter().zip(self.acc) {
            if acc.no_tool == 0 {
                log::warn!("query `{}` has no tool-free samples; skipped", query.query_id);
                set.skipped.push(query.query_id.clone());
                continue;
            }
            let with_tool = (acc.with_tool > 0).then_some(acc.with_tool);
            set.profiles.push(KnowledgeProfile {
                query_id: query.query_id.clone(),
                k_no_tool: acc.no_tool as usize,
                avg_at_k: acc.no_tool_hits as f64 / acc.no_tool as f64,
                entropy_bits: entropy_from_counts(acc.answers.into_values().collect()),
                bin_index: bin_from_counts(acc.no_tool_hits, acc.no_tool),
                k_with_tool: with_tool.map(|n| n as usize),
                avg_at_k_with_tool: with_tool.map(|n| acc.with_tool_hits as f64 / n as f64),
                mean_tool_calls: with_tool.map(|n| acc.with_tool_calls as f64 / n as f64),
                tool_at_k: acc.tool_at_k,
            });
        }
        set
    }
}

/// Builds profiles from in-memory rollouts of both modes.
pub fn build_profiles<'a>(
    trajectories: impl IntoIterator<Item = &'a Trajectory>,
    corpus: &QueryCorpus,
    options: ProfileOptions,
) -> Result<ProfileSet> {
    let mut builder = ProfileBuilder::new(corpus, options);
    for traj in trajectories {
        let query = corpus
            .position(traj.query_id())
            .ok_or_else(|| Error::UnknownQuery {
                line: 0,
                query_id: traj.query_id().to_string(),
            })?;
        builder.add(Sample {
            query,
            mode: traj.mode(),
            sample_index: traj.sample_index(),
            tool_calls: traj.tool_call_count() as u32,
            success: traj.is_success(),
            answer_key: (traj.mode() == Mode::NoTool).then(|| answer_key(traj.final_answer())),
        });
    }
    Ok(builder.finish())
}

/// Streams rollout files into profiles without materializing trajectories.
/// `with_tool` may be absent; lines in either file may be of either mode.
pub fn profile_files(
    corpus: &QueryCorpus,
    no_tool: &Path,
    with_tool: Option<&Path>,
    options: ProfileOptions,
) -> Result<ProfileSet> {
    let mut builder = ProfileBuilder::new(corpus, options);
    for path in std::iter::once(no_tool).chain(with_tool) {
        scan_lines(open(path)?, |lines| {
            let samples = parse_batch(lines, |line| parse_sample(line, corpus))?;
            for s in samples {
                builder.add(s);
            }
            Ok(())
        })
        .map_err(|e| with_path(path, e))?;
    }
    Ok(builder.finish())
}

/// Accepts any JSON string without allocating.
struct AnyStr;

impl<'de> Deserialize<'de> for AnyStr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = AnyStr;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a string")
            }
            fn visit_str<E: serde::de::Error>(self, _: &str) -> std::result::Result<AnyStr, E> {
                Ok(AnyStr)
            }
        }
        d.deserialize_str(V)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnView<'a> {
    kind: TurnKind,
    #[serde(default)]
    #[allow(dead_code)]
    text: Option<AnyStr>,
    #[serde(default, borrow)]
    tool_name: Option<Cow<'a, str>>,
    #[serde(default)]
    tool_args: Option<AnyStr>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryView<'a> {
    #[serde(borrow)]
    query_id: Cow<'a, str>,
    mode: Mode,
    sample_index: u32,
    #[serde(borrow)]
    turns: Vec<TurnView<'a>>,
    #[serde(borrow)]
    final_answer: Cow<'a, str>,
    #[serde(default)]
    correct: Option<bool>,
}

fn parse_sample(line: Line<'_>, corpus: &QueryCorpus) -> Result<Sample> {
    let view: TrajectoryView<'_> =
        serde_json::from_str(line.text).map_err(|e| Error::from_json(line.number, e))?;
    let query = corpus
        .position(&view.query_id)
        .ok_or_else(|| Error::UnknownQuery {
            line: line.number,
            query_id: view.query_id.to_string(),
        })?;
    let stats = turn_stats(
        view.mode,
        view.turns
            .iter()
            .map(|t| (t.kind, t.tool_name.as_deref(), t.tool_args.is_some())),
    )
    .map_err(|message| Error::Invariant {
        line: line.number,
        message,
    })?;
    let correct = match view.correct {
        Some(c) => c,
        None => answers_equivalent(&view.final_answer, &corpus.records()[query].gold_answer),
    };
    Ok(Sample {
        query,
        mode: view.mode,
        sample_index: view.sample_index,
        tool_calls: stats.tool_calls as u32,
        success: correct && !stats.truncated,
        answer_key: (view.mode == Mode::NoTool).then(|| answer_key(&view.final_answer)),
    })
}

/// Aggregates over the queries that fall into one availability bin.
/// Means are `None` when no member query carries the quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub bin_index: u8,
    pub query_count: usize,
    pub mean_entropy_bits: Option<f64>,
    pub mean_avg_at_k_with_tool: Option<f64>,
    pub mean_tool_calls: Option<f64>,
}

/// Always returns eleven summaries, one per bin, in bin order.
pub fn bin_summaries(profiles: &[KnowledgeProfile]) -> Vec<BinSummary> {
    (0..BIN_COUNT as u8)
        .map(|bin| {
            let members: Vec<&KnowledgeProfile> =
                profiles.iter().filter(|p| p.bin_index == bin).collect();
            BinSummary {
                bin_index: bin,
                query_count: members.len(),
                mean_entropy_bits: mean(members.iter().map(|p| p.entropy_bits)),
                mean_avg_at_k_with_tool: mean(members.iter().filter_map(|p| p.avg_at_k_with_tool)),
                mean_tool_calls: mean(members.iter().filter_map(|p| p.mean_tool_calls)),
            }
        })
        .collect()
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}
