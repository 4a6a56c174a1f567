//! Queries, turns and rollout trajectories.

use serde::{Deserialize, Serialize};

use crate::answer::answers_equivalent;

/// One benchmark question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRecord {
    pub query_id: String,
    pub benchmark: String,
    pub prompt: String,
    pub gold_answer: String,
    /// `None` means relevance is unknown; an empty list means every provided
    /// tool is irrelevant to the query.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevant_tools: Option<Vec<String>>,
}

impl QueryRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.query_id.is_empty() {
            return Err("query_id must not be empty".into());
        }
        if self.gold_answer.is_empty() {
            return Err(format!("query `{}`: gold_answer must not be empty", self.query_id));
        }
        Ok(())
    }

    /// Whether `tool` is relevant, or `None` when relevance is unknown.
    pub fn tool_is_relevant(&self, tool: &str) -> Option<bool> {
        self.relevant_tools
            .as_ref()
            .map(|tools| tools.iter().any(|t| t == tool))
    }

    pub fn all_tools_irrelevant(&self) -> bool {
        matches!(&self.relevant_tools, Some(tools) if tools.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    WithTool,
    NoTool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Generation,
    ToolCall,
    ToolResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub kind: TurnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_args: Option<String>,
}

impl Turn {
    pub fn generation(text: impl Into<String>) -> Self {
        Turn {
            kind: TurnKind::Generation,
            text: Some(text.into()),
            tool_name: None,
            tool_args: None,
        }
    }

    pub fn tool_call(name: impl Into<String>, args: impl Into<String>) -> Self {
        Turn {
            kind: TurnKind::ToolCall,
            text: None,
            tool_name: Some(name.into()),
            tool_args: Some(args.into()),
        }
    }

    pub fn tool_result(text: impl Into<String>) -> Self {
        Turn {
            kind: TurnKind::ToolResult,
            text: Some(text.into()),
            tool_name: None,
            tool_args: None,
        }
    }
}

/// Structural facts about a turn sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct TurnStats {
    pub tool_calls: usize,
    pub truncated: bool,
}

/// Validates turn shapes and counts tool calls. Each item is
/// `(kind, tool_name, has_tool_args)`.
pub(crate) fn turn_stats<'a>(
    mode: Mode,
    turns: impl IntoIterator<Item = (TurnKind, Option<&'a str>, bool)>,
) -> Result<TurnStats, String> {
    let mut stats = TurnStats::default();
    let mut pending_call = false;
    for (index, (kind, name, has_args)) in turns.into_iter().enumerate() {
        match kind {
            TurnKind::ToolCall => {
                if name.is_none_or(str::is_empty) {
                    return Err(format!("turn {index}: tool_call without tool_name"));
                }
                stats.tool_calls += 1;
                pending_call = true;
            }
            TurnKind::Generation | TurnKind::ToolResult => {
                if name.is_some() || has_args {
                    return Err(format!(
                        "turn {index}: {} turn carries tool_name/tool_args",
                        kind_name(kind)
                    ));
                }
                if kind == TurnKind::ToolResult {
                    pending_call = false;
                }
            }
        }
    }
    if mode == Mode::NoTool && stats.tool_calls > 0 {
        return Err(format!(
            "mode no_tool trajectory contains {} tool_call turn(s)",
            stats.tool_calls
        ));
    }
    stats.truncated = pending_call;
    Ok(stats)
}

fn kind_name(kind: TurnKind) -> &'static str {
    match kind {
        TurnKind::Generation => "generation",
        TurnKind::ToolCall => "tool_call",
        TurnKind::ToolResult => "tool_result",
    }
}

/// Wire form of a trajectory line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub query_id: String,
    pub mode: Mode,
    pub sample_index: u32,
    pub turns: Vec<Turn>,
    pub final_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

/// A validated rollout. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    query_id: String,
    mode: Mode,
    sample_index: u32,
    turns: Vec<Turn>,
    final_answer: String,
    correct: bool,
    correct_given: bool,
    tool_call_count: usize,
    truncated: bool,
}

impl Trajectory {
    /// Validates a record. `gold` is needed only when the record has no
    /// `correct` flag, in which case correctness is computed by
    /// [`answers_equivalent`].
    pub fn from_record(record: TrajectoryRecord, gold: Option<&str>) -> Result<Self, String> {
        if record.query_id.is_empty() {
            return Err("query_id must not be empty".into());
        }
        let stats = turn_stats(
            record.mode,
            record
                .turns
                .iter()
                .map(|t| (t.kind, t.tool_name.as_deref(), t.tool_args.is_some())),
        )?;
        let (correct, correct_given) = match (record.correct, gold) {
            (Some(c), _) => (c, true),
            (None, Some(gold)) => (answers_equivalent(&record.final_answer, gold), false),
            (None, None) => {
                return Err("`correct` is absent and no gold answer is available".into())
            }
        };
        Ok(Trajectory {
            query_id: record.query_id,
            mode: record.mode,
            sample_index: record.sample_index,
            turns: record.turns,
            final_answer: record.final_answer,
            correct,
            correct_given,
            tool_call_count: stats.tool_calls,
            truncated: stats.truncated,
        })
    }

    /// Builds a trajectory with an explicit correctness flag.
    pub fn new(
        query_id: impl Into<String>,
        mode: Mode,
        sample_index: u32,
        turns: Vec<Turn>,
        final_answer: impl Into<String>,
        correct: bool,
    ) -> Result<Self, String> {
        Self::from_record(
            TrajectoryRecord {
                query_id: query_id.into(),
                mode,
                sample_index,
                turns,
                final_answer: final_answer.into(),
                correct: Some(correct),
            },
            None,
        )
    }

    /// Convenience constructor for a `with_tool` rollout: `calls` complete
    /// call/result exchanges followed by a closing generation turn.
    pub fn with_calls(
        query_id: impl Into<String>,
        sample_index: u32,
        calls: usize,
        correct: bool,
    ) -> Self {
        let mut turns = Vec::with_capacity(2 * calls + 1);
        for i in 0..calls {
            turns.push(Turn::tool_call("python", format!("step_{i}")));
            turns.push(Turn::tool_result("ok"));
        }
        turns.push(Turn::generation("done"));
        Self::new(query_id, Mode::WithTool, sample_index, turns, "", correct)
            .expect("well-formed synthetic trajectory")
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn sample_index(&self) -> u32 {
        self.sample_index
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn final_answer(&self) -> &str {
        &self.final_answer
    }

    /// The verifier's verdict on the final answer.
    pub fn correct(&self) -> bool {
        self.correct
    }

    pub fn tool_call_count(&self) -> usize {
        self.tool_call_count
    }

    /// A tool call never received its result.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// Correct and not truncated. All metrics count success through this.
    pub fn is_success(&self) -> bool {
        self.correct && !self.truncated
    }

    pub fn tool_names(&self) -> impl Iterator<Item = &str> {
        self.turns
            .iter()
            .filter(|t| t.kind == TurnKind::ToolCall)
            .filter_map(|t| t.tool_name.as_deref())
    }

    /// Returns the wire record. `correct` is emitted only if it was present
    /// on input, so ingestion round-trips field for field.
    pub fn to_record(&self) -> TrajectoryRecord {
        TrajectoryRecord {
            query_id: self.query_id.clone(),
            mode: self.mode,
            sample_index: self.sample_index,
            turns: self.turns.clone(),
            final_answer: self.final_answer.clone(),
            correct: self.correct_given.then_some(self.correct),
        }
    }
}
