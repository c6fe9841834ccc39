use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gamma pole at {0}")]
    Pole(String),
    #[error("divisibility violated: {0}")]
    Divisibility(String),
    #[error("singular point: {0}")]
    Singularity(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
