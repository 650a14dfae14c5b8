use thiserror::Error;

/// Errors raised by potlab operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("kernel is not quasi-symmetric: G[{i}][{j}] = 0 but G[{j}][{i}] > 0")]
    NotQuasiSymmetric { i: usize, j: usize },

    #[error("kernel is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },

    #[error("space has {size} atoms, exceeding the limit of {max}")]
    SpaceTooLarge { size: usize, max: usize },

    #[error("ratio undefined at atom {atom}: G sigma = {value}")]
    UndefinedRatio { atom: usize, value: f64 },

    #[error("not a supersolution at atom {atom}: G(u^q sigma) = {lhs} > u = {rhs}")]
    NotSupersolution { atom: usize, lhs: f64, rhs: f64 },

    #[error("no convergence after {iterations} iterations (achieved {achieved:e})")]
    NoConvergence { iterations: usize, achieved: f64 },

    #[error("iteration not monotone after {halvings} halvings of the start (step {step}, atom {atom})")]
    NotMonotone { halvings: usize, step: usize, atom: usize },

    #[error("weak maximum principle fails: {0}")]
    WmpFails(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
