use thiserror::Error;

/// Errors raised by the library. Validation of MDP contents is reported
/// through [`crate::mdp::ValidationReport`] rather than through this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A caller passed an index outside the declared shape.
    #[error("contract violation: {0}")]
    OutOfRange(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// An aggregation scheme breaks one of its structural invariants. The
    /// first field names the invariant.
    #[error("scheme violates `{invariant}`: {detail}")]
    SchemeViolation { invariant: &'static str, detail: String },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("rank audit: {0}")]
    Audit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn scheme(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::SchemeViolation {
            invariant,
            detail: detail.into(),
        }
    }
}
