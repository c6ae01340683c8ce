use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point ({re}, {im}) is not inside the domain")]
    OutsideDomain { re: f64, im: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cap_reached: path {path_index} did not exit before max_time {max_time}")]
    CapReached { path_index: u64, max_time: f64 },

    #[error("cap_rejection_rate_exceeded: {rejected} of {attempted} paths hit the time cap")]
    CapRejectionRateExceeded { rejected: usize, attempted: usize },

    #[error("truncation bound exceeded for {quantity}: bound {bound:e} > tolerance {tol:e}")]
    Truncation {
        quantity: &'static str,
        bound: f64,
        tol: f64,
    },

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("quadrature resolution failure for {quantity}: doubling nodes moved the value by {shift:e}")]
    Quadrature { quantity: &'static str, shift: f64 },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("empty sample")]
    EmptySample,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
