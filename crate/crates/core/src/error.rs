//! Error type shared by every module in the crate.

use thiserror::Error;

/// Location and size of the worst violation found by a discrete convexity scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    /// Flat node index at the center of the failing stencil.
    pub node: usize,
    /// Direction of the stencil, as a signed step in grid indices per axis.
    pub direction: Vec<i64>,
    /// Value of the centered second difference (negative means non-convex).
    pub second_difference: f64,
    /// Tolerance the value was compared against.
    pub tolerance: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid point budget exceeded: {requested} nodes > {budget}")]
    PointBudget { requested: usize, budget: usize },

    #[error(
        "discrete convexity violated at node {} along {:?}: second difference {} < -{}",
        .0.node, .0.direction, .0.second_difference, .0.tolerance
    )]
    ConvexityViolation(ConvexityReport),

    #[error("dual domain is empty: {0}")]
    EmptyDual(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("histogram mass mismatch: {left} vs {right} (relative gap {relative_gap})")]
    MassMismatch {
        left: f64,
        right: f64,
        relative_gap: f64,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
