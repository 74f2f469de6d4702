use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: record {ordinal}: {message}")]
    Record {
        path: PathBuf,
        ordinal: usize,
        message: String,
    },

    #[error("{path}: malformed input: {message}")]
    Format { path: PathBuf, message: String },

    #[error("invalid token sequence: {0}")]
    Token(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("nothing to score: {0}")]
    EmptyScoring(String),

    #[error("subset mismatch: {0}")]
    SubsetMismatch(String),

    #[error("duplicate record ({subset}, {id})")]
    DuplicateRecord { subset: String, id: String },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
