use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("positivity violated: psi''({x}) = {value:e} <= 0")]
    PositivityViolation { x: f64, value: f64 },

    #[error("convexity violated: {0}")]
    ConvexityViolation(String),

    #[error("gram entry {index} is non-positive ({value:e})")]
    NonPositiveEntry { index: usize, value: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("eigen solver failed to converge")]
    EigenFailure,

    #[error("condition number estimate {0:e} exceeds the 1e12 ceiling")]
    Conditioning(f64),

    #[error("degenerate metric at t = {t}, x = {x}: psi'' = {value:e}")]
    DegenerateMetric { t: f64, x: f64, value: f64 },

    #[error("shift sequence is not summable: {0}")]
    NotSummable(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("point outside the sampled domain: {0}")]
    OutOfDomain(String),

    #[error("spectral basis is not aligned with monomials")]
    NonRadial,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
