use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its contract (empty interval, bad cap, mismatched layer lists).
    #[error("configuration error: {0}")]
    Config(String),

    /// The caller broke an API protocol, e.g. stepping a finished episode.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Malformed text input. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
