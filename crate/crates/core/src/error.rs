use thiserror::Error;

/// Errors raised by the geometry suite.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate immersion at {point:?}: {reason}")]
    DegenerateImmersion { point: Vec<f64>, reason: String },

    #[error("immersion defect at {point:?}: constraint violated by {violation:e}")]
    ImmersionDefect { point: Vec<f64>, violation: f64 },

    #[error("finite-difference instability: {0}")]
    FdInstability(String),

    #[error("stencil leaves the domain along non-periodic axis {axis}")]
    BoundaryStencil { axis: usize },

    #[error("{0} requires a closed (compact) surface")]
    CompactnessRequired(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;

pub(crate) fn invalid(msg: impl Into<String>) -> GeomError {
    GeomError::InvalidArgument(msg.into())
}
