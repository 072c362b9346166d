use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("time integration diverged at step {step} (max |psi| = {norm:e})")]
    Divergence { step: usize, norm: f64 },

    #[error("eigenvalue solver did not converge for element {element} after {sweeps} sweeps")]
    EigenNoConvergence { element: usize, sweeps: usize },

    #[error("power iteration did not converge within {iterations} iterations (last estimate {estimate:e})")]
    PowerIterationNoConvergence { iterations: usize, estimate: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotPositiveDefinite(_)
            | Error::Divergence { .. }
            | Error::EigenNoConvergence { .. }
            | Error::PowerIterationNoConvergence { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
