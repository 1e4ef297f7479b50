use thiserror::Error;

/// Errors raised by the solvers and certificate builders.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqrError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("matrix is not stable (spectral abscissa {abscissa:.6e})")]
    Stability { abscissa: f64 },

    #[error("standing assumption violated: {0}")]
    Assumption(String),

    #[error("ill-conditioned problem: {0}")]
    IllConditioned(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("lifted Gramian is singular (lambda_min(X) = {lambda_min:.3e})")]
    SingularLift { lambda_min: f64 },

    #[error("sublevel sampling failed: {0}")]
    Sampling(String),

    #[error("gradient iterate {iter} is not stabilizing (spectral abscissa {abscissa:.3e}, step {step:.3e})")]
    IterateUnstable {
        iter: usize,
        abscissa: f64,
        step: f64,
    },

    #[error("cost increased at iteration {iter}: {before:.12e} -> {after:.12e}")]
    NonMonotone {
        iter: usize,
        before: f64,
        after: f64,
    },
}

pub type Result<T, E = LqrError> = std::result::Result<T, E>;
