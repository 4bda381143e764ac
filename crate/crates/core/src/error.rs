//! Error type shared by all modules.

/// Everything that can go wrong outside of ordinary report-carried failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two grid-based values were combined but live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A location or shift does not land on the sample grid.
    #[error("off-grid value {value} is not a multiple of step {step}")]
    OffGrid { value: f64, step: f64 },

    /// A kernel row carries total variation >= 1, so the Neumann route is unavailable.
    #[error("kernel is not contractive: max row variation {row_sum} >= 1")]
    NotContractive { row_sum: f64 },

    /// Fixed-point or recovery iteration did not reach its tolerance.
    #[error("no convergence after {iters} iterations (last delta {delta:e}, tol {tol:e})")]
    NoConvergence { iters: usize, delta: f64, tol: f64 },

    /// Structural problem found while building a model or operator.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A run was requested on a model whose validation has hard failures.
    #[error("validation failure: {0}")]
    ValidationFailure(String),

    /// Initial data does not satisfy the compatibility the operation needs.
    #[error("incompatible initial data: {0}")]
    IncompatibleInitialData(String),

    /// A trajectory window was requested outside the stored range.
    #[error("horizon exceeded: requested history at t = {requested} but stored range starts at {available}")]
    HorizonExceeded { requested: f64, available: f64 },

    /// An order relation asserted by a diagnostic was violated.
    #[error("order violation at t = {t}, component {component}: {detail}")]
    OrderViolation { t: f64, component: usize, detail: String },

    /// No path between the queried nodes (contract violation on the inputs).
    #[error("no path from {from} to {to} inside the requested set")]
    NoPath { from: usize, to: usize },

    /// An argument violates a documented precondition.
    #[error("bad argument: {0}")]
    BadArgument(String),

    /// Scenario file problem, with location when the parser provides one.
    #[error("scenario error: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
