use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical core and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: String, found: String },

    #[error("field contains a non-finite value at index {index}")]
    NonFinite { index: usize },

    /// The singular potential was evaluated at or beyond the pure phases.
    #[error("potential evaluated outside (-1, 1): s = {value:e}")]
    PotentialDomain { value: f64 },

    #[error("inner solver did not converge at dt = {dt:e} (last increment {residual:e})")]
    InnerSolverDiverged { dt: f64, residual: f64 },

    #[error("monitor violation at t = {t:e}: {reason}")]
    MonitorViolation { t: f64, reason: String },

    /// A constant nonzero truncation has no gradient to bound it by.
    #[error("truncation at rho = {rho} is a nonzero constant (norm {norm:e})")]
    DegenerateTruncation { rho: f64, norm: f64 },

    #[error("stationary solver did not converge after {iterations} iterations (increment {increment:e})")]
    StationaryNotConverged { iterations: usize, increment: f64 },

    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },

    #[error("config line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },

    #[error("config key `{key}`: {reason}")]
    ConfigValue { key: String, reason: String },

    #[error("degiorgi: {0}")]
    Trajectory(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (as opposed to usage or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PotentialDomain { .. }
                | Error::InnerSolverDiverged { .. }
                | Error::MonitorViolation { .. }
                | Error::DegenerateTruncation { .. }
                | Error::StationaryNotConverged { .. }
                | Error::NonFinite { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Snapshot { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
