use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// [`Error::exit_code`] maps each variant onto the command-line contract:
/// I/O failures exit with 3, everything else with 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: header declares {expected} bytes of pixel data, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("non-finite value at band {band}, index {index}")]
    NonFinite { band: usize, index: usize },
    #[error("unknown band label {0:?} (expected \"VV\" or \"VH\")")]
    UnknownBand(String),
    #[error(
        "could not place vessel {index} of {requested} without overlap after {attempts} attempts"
    )]
    PlacementFailure {
        index: usize,
        requested: usize,
        attempts: usize,
    },
    #[error("scene of {rows}x{cols} is smaller than a {size}x{size} window")]
    SceneTooSmall {
        rows: usize,
        cols: usize,
        size: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("weight file format: {0}")]
    Format(String),
    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 3 for I/O, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
