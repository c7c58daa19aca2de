use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure categories shared by every module of the lab.
///
/// The CLI maps [`Error::is_precondition`] failures to exit code 3; every
/// other variant indicates a numerical failure.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("coefficients (lambda={lambda}, mu={mu}) not admissible: {condition} violated")]
    Admissibility {
        lambda: f64,
        mu: f64,
        condition: &'static str,
    },

    #[error("projection frame invalid: {0}")]
    FrameInvalid(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("dimension {dim} unsupported ({reason})")]
    Dimension { dim: usize, reason: &'static str },

    #[error("field range [{lo}, {hi}] not inside allowed interval [{allowed_lo}, {allowed_hi}]")]
    Range {
        lo: f64,
        hi: f64,
        allowed_lo: f64,
        allowed_hi: f64,
    },

    #[error("mean spec '{name}' is not convex: {witness}")]
    NotConvex { name: String, witness: String },

    #[error("control rejected at step {step}: R({beta}) is infinite")]
    InfiniteConjugate { step: usize, beta: f64 },

    #[error("strategy is not causal: outputs differ at step {step} before the controls diverge")]
    NonCausal { step: usize },

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
}

impl Error {
    pub fn is_precondition(&self) -> bool {
        !matches!(self, Error::NonFinite(_) | Error::NonCausal { .. })
    }
}
