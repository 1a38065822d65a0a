use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point set")]
    EmptyPointSet,

    #[error("invalid point {index}: {reason}")]
    InvalidPoint { index: usize, reason: &'static str },

    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),

    #[error("not a {expected} file")]
    BadMagic { expected: &'static str },

    #[error("unexpected end of file, expected {expected} bytes, found {found}")]
    UnexpectedEof { expected: usize, found: usize },

    #[error("trailing data: expected {expected} bytes, found {found}")]
    TrailingBytes { expected: usize, found: usize },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("empty sequence")]
    EmptySequence,

    #[error("missing frame {0}")]
    MissingFrame(String),

    #[error("timestamps not strictly increasing at frame {0}")]
    NonMonotonicTimestamps(usize),

    #[error("empty scene")]
    EmptyScene,

    #[error("cannot index empty cloud")]
    EmptyCloud,

    #[error("negative radius")]
    NegativeRadius,

    #[error("insufficient correspondences: {0} pairs, need at least 3")]
    InsufficientCorrespondences(usize),

    #[error("pair count mismatch: {source_len} source vs {target_len} target")]
    PairCountMismatch { source_len: usize, target_len: usize },

    #[error("registration lost: {0} correspondences")]
    RegistrationLost(usize),

    #[error("mask misaligned{}: mask has {mask_len} entries, cloud has {cloud_len} points", frame.as_ref().map(|f| format!(" for frame {f}")).unwrap_or_default())]
    MaskMisaligned {
        frame: Option<String>,
        mask_len: usize,
        cloud_len: usize,
    },

    #[error("no labels at start frame {0}")]
    NoLabelsAtStart(usize),

    #[error("frame {index} out of range (sequence has {count} frames)")]
    FrameOutOfRange { index: usize, count: usize },

    #[error("label {0} not in palette")]
    LabelNotInPalette(u16),

    #[error("nothing to undo")]
    NothingToUndo,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid palette: {0}")]
    InvalidPalette(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
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
}
