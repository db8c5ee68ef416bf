//! Crate-wide error type.

/// Errors produced by the qsflow library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (defect {defect:.3e}, tolerance {tol:.3e})")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("operator is not an isometry (defect {defect:.3e}, tolerance {tol:.3e})")]
    NotIsometry { defect: f64, tol: f64 },
    #[error("domain basis is not closed under {op}: residual {residual:.3e} exceeds {tol:.3e}")]
    DomainNotClosed {
        op: &'static str,
        residual: f64,
        tol: f64,
    },
    #[error("generator has no standard-form record; validate it first")]
    NotStandardForm,
    #[error("precheck failed: {0}")]
    Precheck(String),
    #[error("argument out of range: {0}")]
    Range(String),
    #[error("state dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: u128, cap: u128 },
    #[error("torus elements disagree: {0}")]
    LambdaMismatch(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
