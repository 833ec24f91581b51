use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("support error: {0}")]
    Support(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("memory error: {0}")]
    Memory(String),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("stopping region of period {period} is not an interval: node {node} stops after a continuation node")]
    NotThreshold { period: usize, node: usize },
    #[error("deviation oracle needs {required} evaluations, budget is {budget}")]
    Budget { required: u128, budget: u128 },
    #[error("derivative unavailable: {0}")]
    Derivative(String),
    #[error("objective is not finite at {0:?}")]
    NonFinite(Vec<f64>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
