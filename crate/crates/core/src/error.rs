use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("cannot open {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("malformed CoNLL-U line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("invalid dependency tree ending at line {line}: {reason}")]
    InvalidTree { line: usize, reason: String },

    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("empty distribution: {0}")]
    EmptyDistribution(&'static str),

    #[error("empty embedding table")]
    EmptyTable,

    #[error("inconsistent vector dimension on line {line}: expected {expected}, found {found}")]
    InconsistentDim {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite loss at batch {batch}")]
    NonFiniteLoss { batch: usize },

    #[error("insufficient data: {have} examples for {k} folds")]
    InsufficientData { have: usize, k: usize },

    #[error("cannot split {0} examples into equal halves")]
    OddSize(usize),

    #[error("length mismatch: {predictions} predictions vs {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),
}
