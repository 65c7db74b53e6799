use thiserror::Error;

/// Errors produced by window construction, sampling, and experiment runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("vertex index {index} out of range (vertex count {count})")]
    VertexOutOfRange { index: u32, count: u32 },

    #[error("window too large: {0}")]
    WindowTooLarge(String),

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
