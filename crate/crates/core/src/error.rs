use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by every stage of the pipeline.
///
/// The variants are grouped so the CLI can map them onto exit codes:
/// configuration problems exit with 2, bad input data with 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("feature arity mismatch: expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("model `{model}`, feature set {feature_set}, horizon {horizon}: {source}")]
    Cell {
        model: String,
        feature_set: String,
        horizon: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the experiment cell it came from.
    pub fn in_cell(self, model: &str, feature_set: &str, horizon: &str) -> Self {
        Error::Cell {
            model: model.to_string(),
            feature_set: feature_set.to_string(),
            horizon: horizon.to_string(),
            source: Box::new(self),
        }
    }

    /// Process exit code for this error: 2 for configuration, 3 for data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Parse { .. } | Error::Validation(_) | Error::Data(_) | Error::Arity { .. } => 3,
            Error::Io { .. } => 3,
            Error::Cell { source, .. } => source.exit_code(),
        }
    }
}
