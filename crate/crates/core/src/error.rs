use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("non-finite value produced by `{op}`")]
    NonFinite { op: &'static str },

    #[error("backward requires a scalar root, got {height}x{width}")]
    NonScalarRoot { height: usize, width: usize },

    #[error("value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },

    #[error("optimizer diverged at step {step}")]
    Diverged { step: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("{path}: unsupported bit depth ({bits} bits per sample), expected 8")]
    UnsupportedBitDepth { path: PathBuf, bits: u16 },

    #[error("{path}: color images are not supported, expected grayscale")]
    ColorImage { path: PathBuf },

    #[error("no pairs found")]
    NoPairs,

    #[error("unmatched files: {}", .0.join(", "))]
    UnmatchedFiles(Vec<String>),

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
