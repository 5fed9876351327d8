use std::path::PathBuf;

use pvm_core::PvmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),

    #[error("data: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] PvmError),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: not a checkpoint (bad magic)")]
    CheckpointMagic { path: PathBuf },

    #[error("{path}: checkpoint version {found}, expected {expected}")]
    CheckpointVersion { path: PathBuf, found: u16, expected: u16 },

    #[error("{path}: checkpoint checksum mismatch")]
    CheckpointChecksum { path: PathBuf },

    #[error("{path}: checkpoint is malformed: {reason}")]
    CheckpointFormat { path: PathBuf, reason: String },

    #[error("{path}: checkpoint hierarchy {found:?} does not match configured {expected:?}")]
    SpecMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numeric(_) => 4,
            HarnessError::Core(PvmError::InvalidHierarchy(_) | PvmError::FoveaOutOfBounds { .. } | PvmError::WindowTooLarge { .. }) => 2,
            HarnessError::SpecMismatch { .. } => 2,
            _ => 3,
        }
    }
}
