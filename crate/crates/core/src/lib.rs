//! Tool-overuse analysis for tool-integrated reasoning rollouts.
//!
//! The crate reads query and trajectory logs, profiles how much each query
//! can be answered without tools, labels tool calls as justified, redundant
//! or irrelevant, evaluates reward, advantage and preference-loss terms on
//! logged data, and simulates an expected-utility model of tool choice.

pub mod advantage;
pub mod answer;
pub mod classify;
pub mod error;
pub mod ingest;
pub mod numfmt;
pub mod objective;
pub mod preference;
pub mod profile;
pub mod report;
pub mod reward;
pub mod svg;
pub mod trajectory;
pub mod utility;

pub use error::{Error, Result};
pub use ingest::QueryCorpus;
pub use profile::{BinSummary, KnowledgeProfile};
pub use trajectory::{Mode, QueryRecord, Trajectory, TrajectoryRecord, Turn, TurnKind};
