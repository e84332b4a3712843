use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("singular input: {0}")]
    SingularInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("domain construction failed: {0}")]
    Construction(String),
    #[error("coefficient validation failed: {reason} (nodes {nodes:?})")]
    Validation { reason: String, nodes: Vec<usize> },
    #[error("index error: {0}")]
    Index(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("linear solver failure: {0}")]
    Solver(String),
    #[error("Laplace tail cannot be certified at p = {p}: {detail}")]
    TailRisk { p: f64, detail: String },
    #[error("insufficient signal: {detail} (suggested horizon {suggested_horizon})")]
    InsufficientSignal { detail: String, suggested_horizon: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("property check failed: {0}")]
    Property(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),
}

pub type Result<T> = std::result::Result<T, Error>;
