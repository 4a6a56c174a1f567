use std::path::PathBuf;

/// Errors produced by ingestion, validation and the metric/loss computations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed JSON: {message}")]
    Json { line: usize, message: String },

    #[error("line {line}: schema error: {message}")]
    Schema { line: usize, message: String },

    #[error("line {line}: duplicate query_id `{query_id}`")]
    DuplicateQuery { line: usize, query_id: String },

    #[error("line {line}: unknown query_id `{query_id}`")]
    UnknownQuery { line: usize, query_id: String },

    #[error("line {line}: {message}")]
    Invariant { line: usize, message: String },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("query_id mismatch: expected `{expected}`, found `{found}`")]
    QueryMismatch { expected: String, found: String },

    #[error("trajectory `{traj_id}` token {token}: non-finite {field}")]
    NonFinite {
        traj_id: String,
        token: usize,
        field: &'static str,
    },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Splits a serde_json failure into syntax errors and schema (shape) errors.
    pub(crate) fn from_json(line: usize, err: serde_json::Error) -> Self {
        use serde_json::error::Category;
        let message = strip_position(&err.to_string());
        match err.classify() {
            Category::Data => Error::Schema { line, message },
            _ => Error::Json { line, message },
        }
    }
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(idx) => message[..idx].to_string(),
        None => message.to_string(),
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}
