use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter or configuration value violates a precondition.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// An operation was applied to a field in the wrong representation.
    #[error("misuse: {0}")]
    Misuse(String),

    /// An iterative solver exhausted its budget.
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// The iterate collapsed to zero or spread over the whole box.
    #[error("vanishing: no localised profile after {iterations} iterations")]
    Vanishing { iterations: usize },

    /// Shooting could not bracket the separatrix amplitude.
    #[error("no shooting bracket in [{lo:.3e}, {hi:.3e}]; widen the amplitude bracket")]
    BracketNotFound { lo: f64, hi: f64 },

    /// A direct linear solve hit a zero pivot or produced non-finite values.
    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    /// Radiation reached the outer wall of the box during a time evolution.
    #[error("boundary reached at t = {t:.6}: |u(r_max)| / max|u| = {ratio:.3e}; enlarge r_max")]
    BoundaryReached { t: f64, ratio: f64 },

    /// A time step was refused part-way through a run, typically because
    /// the solution is concentrating.
    #[error("step rejected at t = {t:.6}: {reason}")]
    StepRejected { t: f64, reason: String },

    /// An eigenvalue computation failed.
    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
