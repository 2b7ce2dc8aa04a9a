use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("derivative order {0} exceeds the supported maximum of 64")]
    Order(usize),
    #[error("{what} did not converge within {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },
    #[error("offspring law needs more than {0} entries to reach the tail tolerance")]
    Truncation(usize),
    #[error("invalid graft position: {0}")]
    Position(String),
    #[error("span requested for an empty leaf set")]
    EmptySpan,
    #[error("theta {theta} lies outside the marked horizon [0, {horizon}]")]
    Horizon { theta: f64, horizon: f64 },
    #[error("embedding error: {0}")]
    Embedding(String),
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("sampler exceeded its size caps")]
    Exceeded,
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
