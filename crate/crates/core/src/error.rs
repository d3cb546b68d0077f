use thiserror::Error;

/// Errors raised by the fold library.
///
/// Hypothesis failures are *not* errors: the certification checks return
/// reports with witnesses. Errors are reserved for bad input and numerical
/// breakdown.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FoldError {
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Newton refinement gave up; `fallback` is the unrefined starting point.
    #[error("newton refinement did not converge in {steps} steps (residual {residual:.3e})")]
    NewtonDiverged {
        steps: usize,
        residual: f64,
        fallback: Vec<f64>,
    },

    /// A sampled pattern contradicts a certified hypothesis.
    #[error("integrity violation: {0}")]
    Integrity(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, FoldError>;

pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> FoldError {
    FoldError::Parameter {
        field,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(FoldError::Dimension { expected, got })
    }
}
