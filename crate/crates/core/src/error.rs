use std::path::PathBuf;

use thiserror::Error;

use crate::strategy::Status;

/// Errors raised by the search library and harness.
#[derive(Debug, Error)]
pub enum CatError {
    #[error("domain size must be at least 1")]
    EmptyDomain,

    #[error("difficulty level {level} outside 1..={n}")]
    LevelOutOfRange { level: usize, n: usize },

    #[error("threshold {threshold} outside 0..={n}")]
    ThresholdOutOfRange { threshold: usize, n: usize },

    #[error("block size must be at least 1")]
    ZeroBlockSize,

    #[error("{what} must be a probability in [0, 1], got {value}")]
    InvalidProbability { what: &'static str, value: f64 },

    #[error("profile covers {profile_n} levels but the search domain has {n}")]
    ProfileMismatch { profile_n: usize, n: usize },

    #[error("external profiles cannot answer probes in-process")]
    ExternalProfile,

    #[error("operation `{op}` not allowed while session is {status:?}")]
    InvalidState { op: &'static str, status: Status },

    #[error("unsupported session state version {0}")]
    UnsupportedVersion(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CatError> = std::result::Result<T, E>;
