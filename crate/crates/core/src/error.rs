//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by tree construction, transforms, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was invoked on an object in the wrong state
    /// (e.g. lists requested for an unbalanced tree).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A point lies outside the domain of the object it was evaluated on.
    #[error("out of domain: point ({0}, {1})")]
    OutOfDomain(f64, f64),

    /// Refinement exceeded the maximum tree depth while resolving a function.
    #[error("resolution failure at ({x}, {y}): depth {depth} insufficient")]
    ResolutionFailure {
        /// x-coordinate of the offending region.
        x: f64,
        /// y-coordinate of the offending region.
        y: f64,
        /// Depth reached when refinement gave up.
        depth: usize,
    },

    /// A self-test detected that an approximation missed its accuracy target.
    #[error("accuracy failure: {0}")]
    AccuracyFailure(String),

    /// Boundary geometry is irregular (vanishing parametrization speed, open chain, ...).
    #[error("geometry failure: {0}")]
    GeometryFailure(String),

    /// A marching step failed (secant non-convergence, potential evaluation error).
    #[error("step failure at t={t}: {msg}")]
    StepFailure {
        /// Time at which the step failed.
        t: f64,
        /// Description of the failure.
        msg: String,
    },

    /// I/O or parse error in serialization and config handling.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O error.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenient result alias.
pub type Result<T> = std::result::Result<T, Error>;
