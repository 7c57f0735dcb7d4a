use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("region does not intersect the grid")]
    EmptyRegion,
    #[error("gamma = {0} is outside [-d, 0]")]
    GammaOutOfRange(f64),
    #[error("field is identically zero")]
    ZeroField,
    #[error("field has {count} negative nodes (first at index {first})")]
    NegativeField { count: usize, first: usize },
    #[error("weight vanishes on {0}")]
    VanishingWeight(String),
    #[error("eigen-solver failed at node {node}: {reason}")]
    EigenFailure { node: usize, reason: String },
    #[error("iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("stability guard violated: dt = {dt} exceeds {limit}")]
    Stability { dt: f64, limit: f64 },
    #[error("mass drift {drift:e} exceeds tolerance {tol:e}")]
    MassDrift { drift: f64, tol: f64 },
    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
