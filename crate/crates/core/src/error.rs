use thiserror::Error;

use crate::model::Estimate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error(transparent)]
    Convergence(Box<ConvergenceFailure>),

    #[error("LLA iteration {iteration}: {source}")]
    LlaStep {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("every lambda on the grid failed ({attempts} tried); last: {last}")]
    TuningFailed { attempts: usize, last: Box<Error> },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },
}

impl Error {
    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Convergence(_) | Error::Singular(_) => true,
            Error::LlaStep { source, .. } => source.is_numerical(),
            Error::TuningFailed { .. } => true,
            _ => false,
        }
    }

    pub(crate) fn convergence(
        solver: &'static str,
        iterations: usize,
        residual: f64,
        last: Estimate,
    ) -> Self {
        Error::Convergence(Box::new(ConvergenceFailure {
            solver,
            iterations,
            residual,
            last,
        }))
    }
}

/// A solver ran out of iterations; carries the last iterate.
#[derive(Debug, Clone, Error)]
#[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
pub struct ConvergenceFailure {
    pub solver: &'static str,
    pub iterations: usize,
    pub residual: f64,
    pub last: Estimate,
}
