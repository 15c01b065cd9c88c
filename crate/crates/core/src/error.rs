use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("value {value} at index {index} lies outside Ω = [{lo}, {hi}]")]
    OutsideDomain {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("quantile vector decreases at index {index}: {prev} > {next}")]
    NotMonotone { index: usize, prev: f64, next: f64 },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),

    #[error("reference measure is not strictly increasing at index {0}")]
    DegenerateFrame(usize),

    #[error("tangent vector is outside the admissible set; project it first")]
    NotAdmissible,

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("the affine subspace does not meet the constraint set")]
    Infeasible,

    #[error("Dykstra iteration did not converge after {iterations} iterations (last gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("bundle error: {0}")]
    Bundle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
