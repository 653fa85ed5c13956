use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the stylometry pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("record {record:?}: {message}")]
    Record { record: String, message: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("unknown sentence reference {doc}#{sentence}")]
    UnknownSentence { doc: String, sentence: usize },

    #[error("unknown class {0:?}")]
    UnknownClass(String),

    #[error("unknown {kind} {name:?} (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite feature value at row {row}")]
    NonFinite { row: usize },

    #[error("target too short: {len} tokens, need at least {min}")]
    TargetTooShort { len: usize, min: usize },

    #[error("{0}")]
    Data(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
