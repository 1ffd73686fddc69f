use thiserror::Error;

pub type Result<T> = std::result::Result<T, OptError>;

#[derive(Debug, Error)]
pub enum OptError {
    #[error("depth cap exceeded: dimension {dim} already has {len} digits (cap {cap})")]
    DepthCap { dim: usize, len: u32, cap: u32 },

    #[error("dimension index {dim} out of range for p = {p}")]
    BadDimension { dim: usize, p: usize },

    #[error("malformed region code {code:?}: segment {segment} ({reason})")]
    RegionParse {
        code: String,
        segment: usize,
        reason: String,
    },

    #[error("integer overflow counting regions at level {level} in dimension {p}")]
    CountOverflow { level: u32, p: u32 },

    #[error("invalid data at row {row}, column {col}: {reason}")]
    Data {
        row: usize,
        col: usize,
        reason: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cache conflict for region {code}: stored log-phi {stored}, new {new}")]
    CacheConflict { code: String, stored: f64, new: f64 },

    #[error("resource limit reached: {0}")]
    Resource(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("degenerate simplex (volume {volume:e})")]
    Degenerate { volume: f64 },

    #[error("QP solver did not converge after {iterations} iterations (KKT residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("unknown reference density {0:?}")]
    UnknownReference(String),

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
