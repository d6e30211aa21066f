use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the rod model, the sweeps and the experiment runner.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("arc-length {s} m outside [0, {length}] m")]
    Domain { s: f64, length: f64 },

    #[error("field size mismatch: {what} has length {got}, expected {expected}")]
    Size {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("numerical blowup in {sweep} sweep at step {step}")]
    Blowup { sweep: &'static str, step: usize },

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("solve aborted at iteration {iteration}: {source}")]
    Aborted {
        iteration: usize,
        source: Box<SolverError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SolverError>;

pub(crate) fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(SolverError::Size {
            what,
            got,
            expected,
        })
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(SolverError::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}
