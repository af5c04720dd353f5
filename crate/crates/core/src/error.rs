use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A dataset or resource record failed to parse or validate.
    #[error("{source_name}:{line}: {message}")]
    Record {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("duplicate user_id `{user_id}` at line {line} (first seen at line {first_line})")]
    DuplicateUser {
        user_id: String,
        line: usize,
        first_line: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("stratification infeasible: {0}")]
    Stratification(String),

    #[error("image error for {path}: {message}")]
    Image { path: String, message: String },

    #[error("resource fingerprint mismatch for {resource}: model has {expected}, provided {found}")]
    FingerprintMismatch {
        resource: String,
        expected: String,
        found: String,
    },

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Record {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }
}
