use std::io;

use thiserror::Error;

/// Errors produced by the library.
///
/// Variants fall into three families that the command-line front end maps to
/// distinct exit codes: I/O failures, malformed files, and violated data or
/// configuration invariants.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("file truncated while reading {0}")]
    Truncated(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{kind} id {id} out of range (universe size {size})")]
    OutOfRange {
        kind: &'static str,
        id: usize,
        size: usize,
    },

    #[error("invalid sparse vector: {0}")]
    InvalidSparse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    NoExamples(String),
}

impl Error {
    /// True for failures of the underlying filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
