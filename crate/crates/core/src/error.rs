use thiserror::Error;

/// Errors produced by the library.
///
/// The variants follow the failure classes callers need to tell apart:
/// malformed inputs, violated mathematical contracts, exhausted budgets and
/// numerical inconsistencies that indicate a bug.
#[derive(Debug, Error)]
pub enum Error {
    /// The shape of an input does not fit the hypergraph system it refers to.
    #[error("structural error: {0}")]
    Structural(String),

    /// A documented precondition on the values does not hold
    /// (negative weights, a majorization that fails pointwise, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configured size budget would be exceeded.
    #[error("resource budget exceeded: {0}")]
    Resource(String),

    /// A numerical identity that must hold failed beyond tolerance.
    #[error("numeric inconsistency: {0}")]
    Numeric(String),

    /// An invariant of an iterative procedure was broken.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Random instance generation gave up.
    #[error("generation failed: {0}")]
    Generation(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }

    /// True for budget exhaustion, where retrying with a cheaper mode may help.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
