use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cell: {0}")]
    InvalidCell(String),
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("overflow in {0}")]
    Overflow(String),
    #[error("matrix is singular to working precision (pivot {pivot:e} at index {index})")]
    Singular { pivot: f64, index: usize },
    #[error("matrix is not symmetric (relative asymmetry {relative:e})")]
    Asymmetric { relative: f64 },
    #[error("truncation failure: {0}")]
    Truncation(String),
    #[error("iteration did not converge after {iterations} steps (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{method}: {source}")]
    Method {
        method: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_method(self, method: impl Into<String>) -> Self {
        Error::Method {
            method: method.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
