use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invariant value {value:e} is below the relative floor {floor:e}")]
    DegenerateInvariant { value: f64, floor: f64 },

    #[error("invariant changed sign: reference {reference:e}, candidate {candidate:e}")]
    SignMismatch { reference: f64, candidate: f64 },

    #[error("homogeneity degree must be nonzero and finite, got {0}")]
    InvalidDegree(f64),

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("step size {h:e} fell below the minimum {h_min:e} at t = {t}")]
    StepUnderflow { t: f64, h: f64, h_min: f64 },

    #[error("{what} did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },

    #[error("system has no separable kinetic/potential partition")]
    MissingPartition,

    #[error("step density became non-positive ({0:e})")]
    DensityUnderflow(f64),

    #[error("degree matrix is singular or ill conditioned (condition estimate {0:e})")]
    SingularDegreeMatrix(f64),

    #[error("generator Gram matrix is singular")]
    SingularGram,

    #[error("conjugating map is ill conditioned: {0}")]
    IllConditionedMap(String),

    #[error("inverse map argument {0} is out of range")]
    OutOfRange(f64),

    #[error("state is at the singular origin")]
    SingularOrigin,

    #[error("invalid grid: {0}")]
    BadGrid(String),

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
