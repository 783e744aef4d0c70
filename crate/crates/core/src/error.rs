use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {re}+{im}i lies outside the evaluation domain of the potential")]
    OutOfDomain { re: f64, im: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("points {0} and {1} coincide")]
    Collision(usize, usize),

    #[error(
        "basis is ill-conditioned (condition number {condition:.3e}); maximum stable degree is {max_stable_degree}"
    )]
    IllConditioned { condition: f64, max_stable_degree: usize },

    #[error("eigen-decomposition failed: {0}")]
    EigenSolve(String),

    #[error("division guard: {0}")]
    DivisionGuard(String),

    #[error("certificate failure: {0}")]
    Certificate(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
