use thiserror::Error;

use crate::solver::NewtonReport;

/// Errors produced by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("position x = {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("size mismatch: expected {expected} entries, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("singular matrix: pivot {index} below tolerance")]
    SingularMatrix { index: usize },

    #[error("Newton iteration did not converge after {} iterations (residual {:.3e})", .0.iterations, .0.final_residual())]
    NoConvergence(Box<NewtonReport>),

    #[error("time step failed at t = {t} after {retries} step halvings: {source}")]
    StepFailure {
        t: f64,
        retries: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("no steady state reached within {steps} steps (rate {rate:.3e})")]
    NoSteadyState { steps: usize, rate: f64 },

    #[error("monitor violation: {0}")]
    MonitorViolation(crate::verify::Violation),

    #[error("invalid tabulated profile: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be finite and strictly positive, got {value}") })
    }
}
