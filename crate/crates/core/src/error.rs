//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row or field that cannot be parsed; `line` is 1-based and counts the
    /// header.
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("duplicate cell (node {node}, metric {metric}, timestamp {timestamp})")]
    DuplicateCell {
        node: String,
        metric: String,
        timestamp: i64,
    },

    #[error("missing cell (node {node}, metric {metric}, timestamp {timestamp})")]
    MissingCell {
        node: String,
        metric: String,
        timestamp: i64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cube is already normalized")]
    AlreadyNormalized,

    #[error("objective is not finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("gradient contains a non-finite entry")]
    NonFiniteGradient,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn malformed(
        path: impl Into<PathBuf>,
        line: usize,
        message: impl Into<String>,
    ) -> Error {
        Error::Malformed {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
