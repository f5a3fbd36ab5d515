use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The camera lies on (or too close to) a projection plane.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// The horizontal projection plane passes too close to camera height.
    #[error("plane height {z_mm:.1} mm is within {h_min:.1} mm of the camera; horizontal projection is degenerate")]
    SameHeight { z_mm: f64, h_min: f64 },

    #[error("flank regions differ by {contrast:.4}, below the minimum contrast {min:.4}")]
    LowContrast { contrast: f64, min: f64 },

    #[error("no line found: {0}")]
    NoLine(String),

    #[error("no pallet evidence at any depth (best score {best:.3} < {threshold:.3})")]
    NoPalletAtDepth { best: f64, threshold: f64 },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("image format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
