//! Error types shared across the crate.

use std::path::PathBuf;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric positive-definite ({context})")]
    NotPositiveDefinite { context: &'static str },

    #[error("degenerate distribution: {0}")]
    Degenerate(&'static str),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("index out of range: {what} = {index}, bound {bound}")]
    OutOfRange { what: &'static str, index: usize, bound: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(#[from] DataError),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Wraps the error with a human-readable location, e.g. `"trial 3, iteration 17"`.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by bad configuration (CLI exit code 2).
    pub fn is_config(&self) -> bool {
        matches!(self.root(), Error::Config(_) | Error::Contract(_))
    }

    /// True for errors caused by malformed input data (CLI exit code 3).
    pub fn is_data(&self) -> bool {
        matches!(self.root(), Error::Data(_))
    }

    /// Process exit code for the command-line tool: 2 config, 3 data or I/O, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            _ if self.is_config() => 2,
            Error::Data(_) | Error::Io { .. } => 3,
            _ => 1,
        }
    }
}

/// Problems found while reading or validating a feature file.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("line {line}: non-finite feature value in column {column}")]
    NonFinite { line: u64, column: String },

    #[error("line {line}: unknown agent id {agent} (expected < {n_agents})")]
    UnknownAgent { line: u64, agent: usize, n_agents: usize },

    #[error("line {line}: duplicate row for agent {agent}, object {object}")]
    Duplicate { line: u64, agent: usize, object: usize },

    #[error("inconsistent object count: agent {agent} has {actual} objects, expected {expected}")]
    InconsistentCount { agent: usize, actual: usize, expected: usize },

    #[error("agent {agent} is missing object {object}")]
    MissingObject { agent: usize, object: usize },

    #[error("line {line}: label {label} conflicts with label {previous} given for object {object}")]
    LabelConflict { line: u64, object: usize, label: usize, previous: usize },

    #[error("feature file has no rows")]
    Empty,

    #[error("{0}")]
    Invalid(String),
}
