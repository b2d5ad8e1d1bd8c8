use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are split along the line the CLI cares about: malformed or
/// inconsistent inputs versus numerical breakdowns during optimization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("mesh is not watertight: {0}")]
    NotWatertight(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite objective at iteration {iteration}{context}")]
    NonFinite { iteration: usize, context: String },

    #[error("solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::NoConvergence { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
