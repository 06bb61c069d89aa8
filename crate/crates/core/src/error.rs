use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.12e})")]
    NotPsd(f64),
    #[error("outside state space: eigenvalue {0:.12e}")]
    OutsideStateSpace(f64),
    #[error("trace is {0:.12e}, expected 1")]
    NotNormalized(f64),
    #[error("not completely positive (Choi eigenvalue {0:.12e})")]
    NotCompletelyPositive(f64),
    #[error("not trace preserving (deviation {0:.3e})")]
    NotTracePreserving(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid observable: {0}")]
    InvalidPovm(String),
    #[error("{0}")]
    Impossible(String),
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    /// Whether the failure comes from bad input rather than from the numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NoConvergence(_) | Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
