use std::fmt;

use nalgebra::Complex;
use thiserror::Error;

/// A named applicability predicate together with its outcome.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub holds: bool,
}

impl ConditionCheck {
    pub fn new(name: impl Into<String>, holds: bool) -> Self {
        Self {
            name: name.into(),
            holds,
        }
    }
}

impl fmt::Display for ConditionCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, if self.holds { "ok" } else { "FAILED" })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// The Lyapunov operator `X -> AX + XA^T` is singular.
    #[error("singular Lyapunov equation: eigenvalues {lambda_i} and {lambda_j} satisfy lambda_i = -lambda_j")]
    NotSylvester {
        lambda_i: Complex<f64>,
        lambda_j: Complex<f64>,
    },

    /// One or more applicability conditions of a closed-form route failed.
    #[error("applicability conditions failed: {}", failed_names(.checks))]
    Condition { checks: Vec<ConditionCheck> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A result would be inaccurate or overflow on this route.
    #[error("accuracy: {0}")]
    Accuracy(String),

    #[error("synthesis failed: {reason} (residual history: {residuals:?})")]
    Synthesis { reason: String, residuals: Vec<f64> },

    #[error("gain does not stabilize the closed loop: {0}")]
    InfeasibleGain(String),

    #[error("both evaluation routes failed; lyapunov: {lyapunov}; expm: {expm}")]
    BothRoutesFailed {
        lyapunov: Box<Error>,
        expm: Box<Error>,
    },
}

fn failed_names(checks: &[ConditionCheck]) -> String {
    checks
        .iter()
        .filter(|c| !c.holds)
        .map(|c| c.name.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// True for errors that stem from mathematical applicability rather than bad input.
    pub fn is_condition_error(&self) -> bool {
        match self {
            Error::NotSylvester { .. }
            | Error::Condition { .. }
            | Error::Numerical(_)
            | Error::Accuracy(_)
            | Error::Synthesis { .. }
            | Error::InfeasibleGain(_) => true,
            Error::BothRoutesFailed { lyapunov, expm } => {
                lyapunov.is_condition_error() && expm.is_condition_error()
            }
            Error::Dimension(_) | Error::NonFinite(_) | Error::Contract(_) => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
