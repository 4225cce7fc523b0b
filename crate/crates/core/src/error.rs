use std::path::PathBuf;

use thiserror::Error;

use crate::numerics::NumericsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("config: {0}")]
    Config(String),
    #[error("empty bag: attention pooling needs at least one patch")]
    EmptyBag,
    #[error("{path}: bad magic {found:?}, expected {expected:?}")]
    BadMagic {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: truncated file ({context})")]
    Truncated { path: PathBuf, context: String },
    #[error("{path}: unsupported format version {found}, expected {expected}")]
    VersionMismatch { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: corrupt file: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("manifest {path} line {line}: {reason}")]
    Manifest { path: PathBuf, line: usize, reason: String },
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
