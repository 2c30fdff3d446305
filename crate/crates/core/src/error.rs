use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("the axis through the origin and n is undefined for n = 0")]
    UndefinedAxis,

    #[error("quadrature grid {grid} is too coarse for max index {max_index} (need an even grid >= 4 * max index)")]
    Undersampled { grid: usize, max_index: usize },

    #[error("grid {grid} aliases frequencies up to {band} (need a power of two >= 2 * band + 2)")]
    Aliasing { grid: usize, band: usize },

    #[error("coefficient table truncation {estimate:e} exceeds tolerance {tolerance:e}")]
    TruncationExceeded { estimate: f64, tolerance: f64 },

    #[error("function does not vanish on the ball |x| < {radius}: max |f| = {residual:e}")]
    NotVanishing { radius: f64, residual: f64 },

    #[error("point {index} lies outside the inner ball |x| <= {radius}")]
    PointOutsideBall { index: usize, radius: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed cache file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
