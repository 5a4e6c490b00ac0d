use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("scale factor must be nonnegative, got {0}")]
    NegativeScale(f64),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("kernel extent {extent:.1} voxels exceeds the cap of {cap}; use a coarser spacing or a smaller radius")]
    KernelTooLarge { extent: f64, cap: usize },

    #[error("bounding box too small; required min {required_min:?}, max {required_max:?}")]
    BboxTooSmall {
        required_min: Vec<f64>,
        required_max: Vec<f64>,
    },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
