use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PvmError>;

#[derive(Debug, Error)]
pub enum PvmError {
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),

    #[error("fovea region {region:?} does not fit a {cols}x{rows} level-0 grid")]
    FoveaOutOfBounds {
        region: (usize, usize, usize, usize),
        cols: usize,
        rows: usize,
    },

    #[error("frame is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    FrameSize {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },

    #[error("window {win_w}x{win_h} does not fit a {grid_w}x{grid_h} map")]
    WindowTooLarge {
        win_w: usize,
        win_h: usize,
        grid_w: usize,
        grid_h: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: not a dataset file (bad magic)")]
    BadMagic { path: PathBuf },

    #[error("{path}: unsupported format version {found} (expected {expected})")]
    VersionMismatch {
        path: PathBuf,
        found: u16,
        expected: u16,
    },

    #[error("{path}: truncated at record {index}")]
    Truncated { path: PathBuf, index: u64 },

    #[error("{path}: checksum mismatch in record {index}")]
    Checksum { path: PathBuf, index: u64 },

    #[error("image: {0}")]
    Image(String),
}

impl PvmError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PvmError::Io {
            path: path.into(),
            source,
        }
    }
}
