use thiserror::Error;

use crate::program::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown word: {0}")]
    UnknownWord(String),

    #[error("provider failure ({task}): {reason}")]
    ProviderFailure { task: String, reason: String },

    #[error("schema violation in {task} response at {path}: {detail}")]
    SchemaViolation {
        task: String,
        path: String,
        detail: String,
    },

    #[error("invariant violation for {word:?}: {}", .problems.join("; "))]
    InvariantViolation { word: String, problems: Vec<String> },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("duplicate template id {0}")]
    DuplicateId(String),

    #[error("missing template id {0}")]
    MissingId(String),

    #[error("no legal trace: {0}")]
    NoLegalTrace(String),

    #[error("synthesis failed after {} attempts", .attempts.len())]
    SynthesisFailure { attempts: Vec<Vec<Violation>> },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid plan: {} violation(s)", .0.len())]
    InvalidPlan(Vec<Violation>),

    #[error("response addressed to node {got}, current node is {expected}")]
    WrongNode { expected: String, got: String },

    #[error("node {node} expects a {expected} response, got {got}")]
    AffordanceMismatch {
        node: String,
        expected: String,
        got: String,
    },

    #[error("session already finished")]
    SessionFinished,

    #[error("cassette has no recording for {task} request {key}")]
    CassetteMiss { task: String, key: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("corpus error at line {line}: {message}")]
    Corpus { line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn provider(task: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ProviderFailure {
            task: task.into(),
            reason: reason.into(),
        }
    }

    /// True for failures that originate in a provider backend.
    pub fn is_provider_failure(&self) -> bool {
        matches!(
            self,
            Error::ProviderFailure { .. }
                | Error::SchemaViolation { .. }
                | Error::UnknownWord(_)
                | Error::CassetteMiss { .. }
        )
    }
}
