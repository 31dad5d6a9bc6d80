use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("shape mismatch: {len} values cannot fill a {rows}x{cols} matrix")]
    Shape { rows: usize, cols: usize, len: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("moment order mismatch: {left} vs {right}")]
    OrderMismatch { left: u8, right: u8 },

    #[error("unsupported moment order {0} (expected 4 or 6)")]
    UnsupportedOrder(u8),

    #[error("invalid summary: {0}")]
    InvalidSummary(String),

    #[error("insufficient samples for variance")]
    InsufficientSamples,

    #[error("sixth-order moments not available (summary order is 4)")]
    SixthOrderUnavailable,

    #[error("identical degenerate inputs")]
    DegenerateInputs,

    #[error("{method} requires d=1")]
    MethodRequiresUnivariate { method: &'static str },

    #[error("method {0} is not available from summaries")]
    MethodUnavailable(&'static str),

    #[error("residual undefined for degenerate")]
    ResidualUndefined,

    #[error("insufficient permutations: {0} (need at least 99)")]
    InsufficientPermutations(usize),

    #[error("invalid distribution parameters: {0}")]
    InvalidParameters(String),

    #[error("kurtosis undefined")]
    KurtosisUndefined,

    #[error("moment of order {0} undefined for this distribution")]
    MomentUndefined(u8),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("protocol: {0}")]
    Protocol(String),
}
