use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The dense oracle was asked to materialize more entries than its cap.
    #[error("dense contraction would produce {entries} entries (cap {cap})")]
    OracleTooLarge { entries: u128, cap: usize },

    #[error("environment cache is invalid and must be rebuilt")]
    MustRebuild,

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("bond consistency: {0}")]
    BondConsistency(String),

    #[error("prefix ordering is not connected at position {0}")]
    DisconnectedPrefix(usize),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("i/o error on {path}: {source}")]
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
}
