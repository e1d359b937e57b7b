use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("{path}: I/O error: {source}")]
    IoAt { path: PathBuf, source: io::Error },

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("duplicate sense {word}#{sense_id}")]
    DuplicateSense { word: String, sense_id: u64 },

    #[error("empty input")]
    Empty,

    #[error("unknown word: {0}")]
    UnknownWord(String),

    #[error("sense {sense_id} out of range for {word} ({count} senses)")]
    SenseOutOfRange {
        word: String,
        sense_id: u64,
        count: usize,
    },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("solver produced non-finite values at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("basis is not orthonormal (Gram deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("pair not found: {0}")]
    PairNotFound(String),

    #[error("rank correlation is undefined (zero rank variance)")]
    UndefinedCorrelation,

    #[error("every pair was skipped")]
    NoPairsScored,

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    // the cause is part of the message, so it is not also exposed as
    // `source()`; otherwise chained reporters print it twice
    #[error("stage {stage}: {cause}")]
    Stage {
        stage: &'static str,
        cause: Box<Error>,
    },
}

impl Error {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn at(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::IoAt { path, source }
    }
}
