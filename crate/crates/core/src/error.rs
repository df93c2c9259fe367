use thiserror::Error;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Geometry,
    EmptyBin,
    Other,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("ground plane not found: {0}")]
    PlaneNotFound(String),

    #[error("degenerate gaze: optical axis is {angle_deg:.3} deg from the plane normal")]
    DegenerateGaze { angle_deg: f64 },

    #[error("insufficient horizon: {0}")]
    Horizon(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pitch bin {0} has no entries")]
    EmptyBin(u8),

    #[error("world generation failed: {0}")]
    Generation(String),

    #[error("goal unreachable from start")]
    Unreachable,

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::EmptyInput(_)
            | Error::Format(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidParameter(_)
            | Error::Horizon(_) => ErrorCategory::Input,
            Error::PlaneNotFound(_) | Error::DegenerateGaze { .. } => ErrorCategory::Geometry,
            Error::EmptyBin(_) => ErrorCategory::EmptyBin,
            _ => ErrorCategory::Other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
