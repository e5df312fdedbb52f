use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wav decode error in {chunk} chunk: {detail}")]
    Decode { chunk: String, detail: String },

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch at {at}: {detail}")]
    Dimension { at: String, detail: String },

    #[error("no valence mapping for {corpus} label {label:?}; valid labels: {valid}")]
    Mapping {
        corpus: String,
        label: String,
        valid: String,
    },

    #[error("cannot parse {name:?} at position {position}: {detail}")]
    Parse {
        name: String,
        position: usize,
        detail: String,
    },

    #[error("{count} file(s) failed to parse:\n{report}")]
    Scan { count: usize, report: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("infeasible split: {0}")]
    Infeasible(String),

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("stale activation cache: {0}")]
    StaleCache(String),

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("missing features for {} clip(s): {}", .0.len(), .0.join(", "))]
    CacheMiss(Vec<String>),

    #[error("split verification failed:\n{0}")]
    Verification(String),

    #[error("malformed file {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("directory not found: {0}")]
    NotFound(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(at: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Dimension {
            at: at.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn decode(chunk: &str, detail: impl Into<String>) -> Self {
        Error::Decode {
            chunk: chunk.to_string(),
            detail: detail.into(),
        }
    }

    /// True for errors caused by user input or configuration rather than
    /// an internal failure. The CLI maps these to exit code 2.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::StaleCache(_) | Error::NonFinite(_))
    }
}
