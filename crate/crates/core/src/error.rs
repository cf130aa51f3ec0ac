use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the reduxcorr library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("audio file {0} contains no samples")]
    EmptyAudio(PathBuf),

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("time must be non-negative, got {0} ms")]
    NegativeTime(f64),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("range {start_ms}..{end_ms} ms lies outside the recording ({length_ms} ms)")]
    RangeOutsideRecording {
        start_ms: u64,
        end_ms: u64,
        length_ms: u64,
    },

    /// A statistic is mathematically undefined for the given input
    /// (zero variance, too few samples).
    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("unknown conversation id {0:?}")]
    UnknownConversation(String),

    #[error("training set is empty after holding out {0:?}")]
    EmptyTrainSet(Vec<String>),

    #[error("column schema mismatch: expected checksum {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
