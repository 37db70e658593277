use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad setup: unreadable repository, unresolvable branch, bad flag values.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("git {command} failed: {stderr}")]
    Git { command: String, stderr: String },

    #[error("commit {0} has no measurable change (cloc = 0)")]
    ZeroCommitLoc(String),

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("schema mismatch\n  expected: {expected}\n  found:    {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("unsupported model file version {found:?} (expected {expected:?})")]
    ModelVersion { expected: String, found: String },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
