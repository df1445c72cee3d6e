use std::path::PathBuf;

use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: missing required column `{0}`")]
    MissingColumn(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("AUC undefined: {0}")]
    UndefinedAuc(String),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("generation error: class `{0}` is unreachable under the configured ranges")]
    Generation(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 3 for numerical divergence, 2 for
    /// every input/config/data problem.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Divergence { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
