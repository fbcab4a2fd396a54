use thiserror::Error;

/// Unified error type for the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented range.
    #[error("bad parameter: {0}")]
    BadParams(String),

    /// A threshold sits closer than `sigma` to a domain endpoint.
    #[error("threshold too close to the domain boundary: {0}")]
    BoundaryViolation(String),

    /// A query point violates the admissible-query margin around the domain.
    #[error("query point outside the admissible domain: w = {w}, admissible [{lo}, {hi}]")]
    QueryOutsideDomain { w: f64, lo: f64, hi: f64 },

    /// The oracle's query budget would be exceeded.
    #[error("query budget exhausted: budget {budget}, used {used}, requested {requested}")]
    BudgetExhausted {
        budget: usize,
        used: usize,
        requested: usize,
    },

    /// Not enough samples to fill a minimal histogram.
    #[error("too few samples for a histogram estimate: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    /// An interval that must have positive width does not.
    #[error("degenerate domain: [{lo}, {hi}]")]
    DegenerateDomain { lo: f64, hi: f64 },

    /// An argument left the mathematical domain of a function.
    #[error("domain error: {0}")]
    DomainError(String),

    /// A scalar root search could not bracket a sign change.
    #[error("root not bracketed: {0}")]
    RootNotBracketed(String),

    /// A sweep cell falls in a noise regime the operation does not support.
    #[error("regime violation: {0}")]
    RegimeViolation(String),

    /// Configuration input could not be parsed or validated.
    #[error("config error: {0}")]
    BadConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
