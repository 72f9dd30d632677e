use std::io;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_MONITOR: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] etdiode_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), source }
    }

    pub fn exit_code(&self) -> u8 {
        fn violation(e: &etdiode_core::Error) -> bool {
            match e {
                etdiode_core::Error::MonitorViolation(_) => true,
                etdiode_core::Error::StepFailure { source, .. } => violation(source),
                _ => false,
            }
        }
        match self {
            Self::Core(e) if violation(e) => EXIT_MONITOR,
            _ => EXIT_FAILURE,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use etdiode_core::verify::{Violation, ViolationKind};

    fn violation() -> etdiode_core::Error {
        etdiode_core::Error::MonitorViolation(Violation {
            kind: ViolationKind::TemperatureAboveMax,
            node: 3,
            t: 0.5,
            value: 2.0,
            bound: 1.75,
        })
    }

    #[test]
    fn monitor_violations_exit_two() {
        assert_eq!(CliError::Core(violation()).exit_code(), EXIT_MONITOR);
        let nested = etdiode_core::Error::StepFailure { t: 0.5, retries: 0, source: Box::new(violation()) };
        assert_eq!(CliError::Core(nested).exit_code(), EXIT_MONITOR);
    }

    #[test]
    fn other_errors_exit_one() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_FAILURE);
        let e = etdiode_core::Error::NoSteadyState { steps: 3, rate: 1.0 };
        assert_eq!(CliError::Core(e).exit_code(), EXIT_FAILURE);
    }
}
