use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite value {value} at position {index}")]
    NonFinite { index: usize, value: f64 },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    /// An expression failed while building block component `F_k`.
    #[error("block component F_{k}: {source}")]
    BlockEval { k: usize, source: EvalError },

    /// The recurrence hit a numeric-domain failure at absolute index `step`.
    /// `partial` holds x_1 .. x_{step-1}.
    #[error("step {step}: {source}")]
    Simulation {
        step: usize,
        source: EvalError,
        partial: Vec<f64>,
    },

    /// `bound` is `None` when no Lipschitz certificate exists at all.
    #[error("system is not certified contractive ({}); pass force to run it anyway", describe_bound(.bound))]
    NotContractive { bound: Option<f64> },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    /// A Lipschitz estimation sample could not be evaluated.
    #[error("sample at {at:?}: {source}")]
    Sampling { at: Vec<f64>, source: EvalError },

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A system definition file is malformed or inconsistent.
    #[error("system definition: {0}")]
    Definition(String),

    /// The system has no closed form in this crate.
    #[error("unsupported shape: {0}")]
    Unsupported(String),
}

fn describe_bound(b: &Option<f64>) -> String {
    match b {
        Some(b) => format!("bound {b}"),
        None => "no bound".to_string(),
    }
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
