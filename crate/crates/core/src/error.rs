use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment driver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid size {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("cost guard: {0}")]
    CostGuard(String),

    #[error("momentum axis under-resolved: {0}")]
    Aliasing(String),

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("infinite escape time: momentum is zero")]
    InfiniteEscapeTime,

    #[error("boundary mass {mass:.3e} exceeds threshold {threshold:.1e}")]
    BoundaryMass { mass: f64, threshold: f64 },

    #[error("classical flow leaves the grid: {0}")]
    FlowExitsGrid(String),

    #[error("Dirichlet basis captures only {captured:.12} of the projected norm with {modes} modes")]
    BasisCapture { captured: f64, modes: usize },

    #[error("state is not normalized: norm = {0}")]
    NotNormalized(f64),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
