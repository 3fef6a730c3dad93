use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by fallible constructors, loaders, and the experiment
/// harness. Pure numeric kernels panic on domain violations instead; those are
/// caller bugs, not recoverable conditions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Validation(String),

    #[error("{path}: row {row}: {message}", path = path.display())]
    CsvParse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
