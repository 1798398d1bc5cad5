//! Error type shared across the toolkit.

use thiserror::Error;

/// Toolkit-wide error type.
///
/// Variants are grouped by what went wrong rather than where: configuration
/// and input problems (`Param`, `Schema`, `Shape`, `Size`, `Grid`, `Data`)
/// versus numerical failures (`Rank`, `Divergence`, `Linalg`). The CLI maps
/// the first group to exit code 2 and the second to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Sample times do not form a uniform, strictly increasing grid.
    #[error("grid error: {0}")]
    Grid(String),

    /// Non-finite or otherwise unusable numeric data.
    #[error("data error: {0}")]
    Data(String),

    /// File contents do not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Too few samples for the requested operation.
    #[error("size error: {0}")]
    Size(String),

    /// Invalid parameter or configuration value.
    #[error("parameter error: {0}")]
    Param(String),

    /// Matrix dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// Input matrix is rank deficient beyond what the operation tolerates.
    #[error("rank error: {0}")]
    Rank(String),

    /// Trajectory norm exceeded the blow-up cutoff during integration.
    #[error("trajectory diverged at t = {time}: |x| exceeded {limit:e}")]
    Divergence { time: f64, limit: f64 },

    /// A linear-algebra backend call failed.
    #[error("linear algebra error: {0}")]
    Linalg(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
