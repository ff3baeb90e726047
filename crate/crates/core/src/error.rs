use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cutoff {cutoff} leaves truncated mass {tail:.3e} above tolerance {tol:.3e}")]
    Truncation { cutoff: usize, tail: f64, tol: f64 },

    #[error("branch has zero norm: {0}")]
    ZeroNorm(&'static str),

    #[error("quadrature did not converge: estimated error {achieved:.3e} > requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("prior gives zero evidence for the observed detection time")]
    ZeroEvidence,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
