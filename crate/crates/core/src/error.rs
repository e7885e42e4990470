use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent row width: record {record} has {found} fields, expected {expected}")]
    RaggedRow {
        record: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate header: {0:?}")]
    DuplicateHeader(String),
    #[error("column not found: {0:?}")]
    MissingColumn(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("single-class labels: {0}")]
    SingleClass(String),
    #[error("did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },
    #[error("embedding backend error: {0}")]
    Backend(String),
    #[error("text not present in embedding file: {0:?}")]
    MissingEmbedding(String),
    #[error("cache integrity error at line {line}: {reason}")]
    CacheIntegrity { line: usize, reason: String },
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { expected: u32, found: u32 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
