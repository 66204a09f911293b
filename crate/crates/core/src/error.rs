use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid exponent p = {0}: must be a finite real >= 1")]
    InvalidP(f64),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("search cap exceeded: {what} found no admissible index up to {cap}")]
    CapExceeded { what: &'static str, cap: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("input too large: {0}")]
    TooLarge(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("support out of range: {0}")]
    SupportOutOfRange(String),

    #[error("gamma not certified: {0}")]
    UncertifiedGamma(String),

    #[error("mode unsupported: {0}")]
    ModeUnsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidP(p))
    }
}
