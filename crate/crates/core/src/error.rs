use thiserror::Error;

/// Errors raised by the sampling, geometry and experiment layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("singularity: {0}")]
    Singular(&'static str),

    #[error("quadrature tolerance {tolerance:e} not met (estimate {estimate}, error {error:e})")]
    Tolerance { tolerance: f64, estimate: f64, error: f64 },

    #[error("voxel budget exceeded: {needed} voxels > cap {cap}")]
    VoxelBudget { needed: u128, cap: u64 },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("regime: {0}")]
    Regime(String),

    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
