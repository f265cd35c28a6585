use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate item id {0:?}")]
    DuplicateId(String),

    #[error("invalid item {id:?}: {reason}")]
    InvalidItem { id: String, reason: String },

    #[error("item {0:?} has no timestamp but a chronological split was requested")]
    MissingTimestamp(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("checkpoint schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("checksum mismatch for tensor {0:?}")]
    ChecksumMismatch(String),

    #[error("text is empty")]
    EmptyText,

    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid perspective order: {0}")]
    InvalidOrder(String),

    #[error("unknown node type {0:?}")]
    UnknownType(String),

    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(String),

    #[error("encoder failed: {0}")]
    Encoder(String),

    #[error("{missing} intent analyses are missing from the cache; run `veracity prepare` first")]
    MissingCache { missing: usize },

    #[error("training split contains a single class")]
    SingleClassTrainSet,

    #[error("cannot evaluate an empty split")]
    EmptySplit,

    #[error("unknown item {0:?}")]
    UnknownItem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
