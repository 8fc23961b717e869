use std::io;
use std::path::PathBuf;

use thiserror::Error;
use twincal_core::calibration::CalibError;
use twincal_core::scene::SceneError;

pub mod exit {
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const SCHEMA: i32 = 4;
    pub const N_MISMATCH: i32 = 5;
    pub const DIVERGENCE: i32 = 6;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {reason}", path.display())]
    Schema { path: PathBuf, reason: String },
    #[error("scene {}: {source}", path.display())]
    Scene { path: PathBuf, source: SceneError },
    #[error("dimension mismatch: {what} has N = {got}, expected {expected}")]
    NMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Calibration(#[from] CalibError),
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => exit::USAGE,
            Error::Io { .. } => exit::IO,
            Error::Schema { .. } | Error::Scene { .. } => exit::SCHEMA,
            Error::NMismatch { .. } => exit::N_MISMATCH,
            Error::Calibration(CalibError::Divergence { .. }) => exit::DIVERGENCE,
            Error::Calibration(_) | Error::Other(_) => exit::OTHER,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
