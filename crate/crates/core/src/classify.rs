//! Overuse taxonomy labels and irrelevance-detection scoring.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::ingest::QueryCorpus;
use crate::profile::KnowledgeProfile;
use crate::trajectory::{Mode, QueryRecord, Trajectory};

/// Availability at or above which tool use counts as redundant.
pub const DEFAULT_REDUNDANCY_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "label", rename_all = "snake_case")]
pub enum OveruseLabel {
    NoTool,
    /// Called at least one tool outside the query's relevant set.
    Irrelevant { offending_tools: Vec<String> },
    /// Called tools although tool-free availability was at least the threshold.
    Redundant { availability: f64 },
    Justified { availability: f64 },
}

impl OveruseLabel {
    pub fn name(&self) -> &'static str {
        match self {
            OveruseLabel::NoTool => "no_tool",
            OveruseLabel::Irrelevant { .. } => "irrelevant",
            OveruseLabel::Redundant { .. } => "redundant",
            OveruseLabel::Justified { .. } => "justified",
        }
    }
}

/// One line of `labels.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTrajectory {
    pub query_id: String,
    pub mode: Mode,
    pub sample_index: u32,
    pub tool_calls: usize,
    #[serde(flatten)]
    pub label: OveruseLabel,
}

fn ensure_same_query(expected: &str, found: &str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::QueryMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        })
    }
}

/// Labels one trajectory. Irrelevant takes precedence over Redundant; when
/// the query's relevant tools are unknown, Irrelevant is never produced.
pub fn classify(
    traj: &Trajectory,
    profile: &KnowledgeProfile,
    query: &QueryRecord,
    redundancy_threshold: f64,
) -> Result<OveruseLabel> {
    ensure_same_query(&query.query_id, traj.query_id())?;
    ensure_same_query(&query.query_id, &profile.query_id)?;
    check_probability("redundancy_threshold", redundancy_threshold)?;

    if traj.tool_call_count() == 0 {
        return Ok(OveruseLabel::NoTool);
    }
    if query.relevant_tools.is_some() {
        let mut offending: Vec<String> = Vec::new();
        for name in traj.tool_names() {
            if query.tool_is_relevant(name) == Some(false) && !offending.iter().any(|o| o == name) {
                offending.push(name.to_string());
            }
        }
        if !offending.is_empty() {
            return Ok(OveruseLabel::Irrelevant {
                offending_tools: offending,
            });
        }
    }
    let availability = profile.avg_at_k;
    Ok(if availability >= redundancy_threshold {
        OveruseLabel::Redundant { availability }
    } else {
        OveruseLabel::Justified { availability }
    })
}

/// Labels every trajectory; each must have a profile and a query record.
pub fn classify_all(
    trajectories: &[Trajectory],
    profiles: &[KnowledgeProfile],
    corpus: &QueryCorpus,
    redundancy_threshold: f64,
) -> Result<Vec<LabeledTrajectory>> {
    let by_id: HashMap<&str, &KnowledgeProfile> =
        profiles.iter().map(|p| (p.query_id.as_str(), p)).collect();
    trajectories
        .iter()
        .map(|traj| {
            let query = corpus.get(traj.query_id()).ok_or_else(|| Error::UnknownQuery {
                line: 0,
                query_id: traj.query_id().to_string(),
            })?;
            let profile = by_id.get(traj.query_id()).ok_or_else(|| {
                Error::Invalid(format!("no profile for query `{}`", traj.query_id()))
            })?;
            Ok(LabeledTrajectory {
                query_id: traj.query_id().to_string(),
                mode: traj.mode(),
                sample_index: traj.sample_index(),
                tool_calls: traj.tool_call_count(),
                label: classify(traj, profile, query, redundancy_threshold)?,
            })
        })
        .collect()
}

/// Fraction of trajectories that answer without calling any tool. Every
/// trajectory must belong to a query whose relevant tool set is empty.
pub fn irrelevance_detection_score(trajectories: &[Trajectory], corpus: &QueryCorpus) -> Result<f64> {
    if trajectories.is_empty() {
        return Err(Error::Empty("trajectories"));
    }
    let mut refrained = 0usize;
    for traj in trajectories {
        let query = corpus.get(traj.query_id()).ok_or_else(|| Error::UnknownQuery {
            line: 0,
            query_id: traj.query_id().to_string(),
        })?;
        if !query.all_tools_irrelevant() {
            return Err(Error::Invalid(format!(
                "query `{}` does not have an empty relevant_tools set",
                query.query_id
            )));
        }
        if traj.tool_call_count() == 0 {
            refrained += 1;
        }
    }
    Ok(refrained as f64 / trajectories.len() as f64)
}

/// Mean over queries of each query's mean tool-call count.
pub fn tool_frequency<'a>(trajectories: impl IntoIterator<Item = &'a Trajectory>) -> Result<f64> {
    let mut per_query: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for traj in trajectories {
        let entry = per_query.entry(traj.query_id()).or_default();
        entry.0 += traj.tool_call_count();
        entry.1 += 1;
    }
    if per_query.is_empty() {
        return Err(Error::Empty("trajectory subset"));
    }
    let sum: f64 = per_query
        .values()
        .map(|&(calls, n)| calls as f64 / n as f64)
        .sum();
    Ok(sum / per_query.len() as f64)
}
