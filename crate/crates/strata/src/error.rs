use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrataError {
    #[error("pole of {0}")]
    Pole(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("weight mismatch: {0} vs {1}")]
    WeightMismatch(i32, i32),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("certificate check failed: {0}")]
    Certificate(String),
}

pub type Result<T> = std::result::Result<T, StrataError>;
