use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("assignment has no matrix for letter {0}")]
    MissingLetter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} violates its defining property (defect {defect:.3e})")]
    InvalidOperator { what: String, defect: f64 },

    #[error(
        "translation operator is not in the span of the projector words (residual {residual:.3e})"
    )]
    SpanDeficiency { residual: f64 },

    #[error("words cannot be factored through the moment index: {0:?}")]
    Unfactorable(Vec<String>),

    #[error("inconsistent statistics: {0}")]
    InconsistentStatistics(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
