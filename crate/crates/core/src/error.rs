use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance size {n}: {reason}")]
    InvalidSize { n: usize, reason: &'static str },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("not a Hamiltonian tour: {0}")]
    NotHamiltonian(String),

    #[error("invalid 2-change ({i}, {j}) on a tour of {n} cities")]
    InvalidMove { i: usize, j: usize, n: usize },

    #[error("{what} supports at most {limit} cities, got {n}")]
    SizeLimit {
        what: &'static str,
        limit: usize,
        n: usize,
    },

    #[error("timestep {t} outside 1..={horizon}")]
    Timestep { t: usize, horizon: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported TSPLIB format: {0}")]
    UnsupportedFormat(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}
