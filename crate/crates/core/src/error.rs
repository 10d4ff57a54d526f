use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },

    #[error("document {id:?} is empty after normalization")]
    EmptyDocument { id: String },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no training pairs could be formed from the corpus")]
    NoTrainingPairs,

    #[error("corrupt {kind} file: {message}")]
    Corrupt { kind: &'static str, message: String },

    #[error("incompatible artifact: {0}")]
    Incompatible(String),

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("forward cache is stale: computed at parameter version {cached}, model is at {current}")]
    StaleCache { cached: u64, current: u64 },

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(kind: &'static str, message: impl Into<String>) -> Self {
        Error::Corrupt {
            kind,
            message: message.into(),
        }
    }

    /// True for failures caused by NaN/Inf arithmetic rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFiniteGradient | Error::NonFinite(_))
    }
}
