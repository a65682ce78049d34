use thiserror::Error;

/// Errors produced by operator construction, configuration and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported interior order {0} (supported: 2, 4, 6)")]
    UnsupportedOrder(usize),
    #[error("grid too small for order {order}: n = {n}, need at least {min_n}")]
    GridTooSmall { order: usize, n: usize, min_n: usize },
    #[error("grid spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("no compatible narrow-stencil second derivative for order {0}")]
    MissingSecondDerivative(usize),
    #[error("charge density must be positive everywhere (min = {0})")]
    NonpositiveDensity(f64),
    #[error("boundary data required for inflow boundary condition")]
    MissingBoundaryData,
    #[error("Dirichlet divergence cleaning needs a non-periodic grid")]
    PeriodicDirichletCleaning,
    #[error("conjugate gradient aborted: {0}")]
    CgAborted(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite values encountered: {0}")]
    NonFinite(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}
