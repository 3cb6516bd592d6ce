use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("eps too large for basin: eps = {eps}, need 2*eps <= mu*r0^2 = {limit}")]
    EpsTooLarge { eps: f64, limit: f64 },

    #[error("objective `{0}` has no Morse data")]
    MissingMorseData(String),

    #[error("witness not established: {0}")]
    WitnessNotEstablished(String),

    #[error("exhaustive mask enumeration infeasible for d = {d} (limit {limit}); use sampling mode")]
    ExhaustiveTooLarge { d: usize, limit: usize },

    #[error("sampler exceeded {0} retries")]
    RetryCap(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown objective id `{0}`")]
    UnknownObjective(String),

    #[error("malformed data file {path}: {msg}")]
    DataFile { path: PathBuf, msg: String },

    #[error("malformed log {path} line {line}: {msg}")]
    Log {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
