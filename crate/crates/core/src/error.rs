use thiserror::Error;

/// Errors raised by the simulation, solver and frontier routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed validation. `key` is the dotted path of the offending field.
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("event cap of {cap} events exceeded on a single path (process may be supercritical)")]
    EventCapExceeded { cap: usize },

    #[error("jump probability {prob:.4} > 1 for component {component} at t = {time:.4}; use a smaller time step")]
    StepTooLarge { component: usize, time: f64, prob: f64 },

    #[error("matrix is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("jump law for component {component} cannot match the given moments: {reason}")]
    JumpLaw { component: usize, reason: String },

    #[error("solver diverged at t = {time:.4}, lambda = {lambda:?}: value {value} outside [0, 1 + {tol:.3e}]")]
    SolverDivergence {
        time: f64,
        lambda: Vec<f64>,
        value: f64,
        tol: f64,
    },

    #[error("resource budget exceeded: {0}")]
    Resource(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("invalid value function level g = {0} (must lie strictly inside (0, 1))")]
    InvalidG(f64),

    #[error("wealth simulation aborted: {blown_up} of {n_paths} paths blew up")]
    WealthBlowUp { blown_up: usize, n_paths: usize },

    #[error("empty table")]
    EmptyTable,

    #[error("table format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerics or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::JumpLaw { .. } | Error::Unsupported(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
