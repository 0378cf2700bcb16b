//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("envelope grids differ")]
    GridMismatch,

    #[error("truncation: {lost:.3e} of the norm falls outside the grid")]
    Truncation { lost: f64 },

    #[error("delay {tau} ns is not an integer multiple of dt = {dt} ns")]
    OffGridDelay { tau: f64, dt: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: estimated error {estimate:.3e}")]
    Quadrature { estimate: f64 },

    #[error("infeasible coupler schedule: requires kappa {required:.6} rad/ns above cap {cap:.6} (deficit {deficit:.3e})")]
    InfeasibleSchedule { required: f64, cap: f64, deficit: f64 },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("norm drift {drift:.3e} at step {step}")]
    NormDrift { drift: f64, step: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("ill-conditioned confusion matrix: condition number {cond:.3e}")]
    IllConditioned { cond: f64 },

    #[error("invalid confusion matrix: {0}")]
    Confusion(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty sweep")]
    EmptySweep,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::NormDrift { .. }
                | Error::NonFinite(_)
                | Error::IllConditioned { .. }
                | Error::Truncation { .. }
        )
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
