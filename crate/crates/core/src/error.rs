use thiserror::Error;

/// Errors produced by the perturbation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is singular to working precision")]
    SingularMatrix,

    #[error("base operator is singular")]
    SingularBase,

    #[error("perturbed identity is singular (det A = {det_a:e})")]
    SingularPerturbation { det_a: f64 },

    #[error("truncated determinant of order {order} vanishes ({det_m:e})")]
    TruncatedDetSingular { order: usize, det_m: f64 },

    #[error("metric is degenerate")]
    DegenerateMetric,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed problem: {0}")]
    Malformed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
