use thiserror::Error;

use crate::calculus::EPoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{op} is undefined at {arg}")]
    Domain { op: &'static str, arg: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result from {op}")]
    NonFinite { op: &'static str },
    #[error("derivative order exceeds the supported maximum of {max}")]
    OrderExceeded { max: usize },
    #[error("singular {what} (condition estimate {condition:e})")]
    Singular { what: &'static str, condition: f64 },
    #[error("variable {0} is not bound here")]
    Unbound(&'static str),
    #[error("kappa must be nonzero")]
    ZeroKappa,
}

/// An evaluation failure tagged with the sample that triggered it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("at {point}: {source}")]
pub struct SampleError {
    pub point: EPoint,
    #[source]
    pub source: EvalError,
}

impl SampleError {
    pub fn new(point: &EPoint, source: EvalError) -> Self {
        SampleError { point: point.clone(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("{what}: expected {expected} entries, found {found}")]
    Count { what: &'static str, expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LiftError {
    #[error("need at least one integration step")]
    NoSteps,
    #[error("at t = {t}: {source}")]
    Eval {
        t: f64,
        #[source]
        source: EvalError,
    },
    #[error("state left the finite range after t = {last_t}{}", singularity.map(|s| format!(" (singularity near t = {s})")).unwrap_or_default())]
    BlowUp { last_t: f64, singularity: Option<f64> },
}
