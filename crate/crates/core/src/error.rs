use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point is not feasible: {0}")]
    Infeasible(String),
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error("Bregman divergence undefined: x has a zero coordinate where p is positive (index {index})")]
    DivergenceUndefined { index: usize },
    #[error("not implemented for this game: {0}")]
    NotImplemented(&'static str),
    #[error("equilibrium oracle failed after {iterations} iterations (best residual {residual:e})")]
    OracleFailure { iterations: usize, residual: f64 },
    #[error("numeric abort at iteration {n}: {detail}")]
    NumericAbort { n: usize, detail: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
