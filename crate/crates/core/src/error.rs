use alloc::string::String;

use thiserror::Error;

/// Errors raised by model construction, fitting and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A value lies outside the domain a kernel is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid numeric configuration (weights, grid sizes, tolerances).
    #[error("configuration error: {0}")]
    Config(String),

    /// The declared model is inconsistent.
    #[error("specification error: {0}")]
    Specification(String),

    /// The data cannot support the requested model.
    #[error("data error: {0}")]
    Data(String),

    /// A linear system could not be solved.
    #[error("solver error: {0}")]
    Solver(String),

    /// The model reproduces the data exactly, so tr(I - A) vanishes.
    #[error("degenerate model: tr(I - A) = {trace:.3e} is not positive")]
    Degenerate { trace: f64 },

    /// An iterative fit ran out of iterations.
    #[error("no convergence after {iterations} iterations (last objective {objective:.6e})")]
    NonConvergence { iterations: usize, objective: f64 },

    /// Requested a term that the model does not contain.
    #[error("query error: {0}")]
    Query(String),

    /// The operation is not defined for this response family.
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    /// Enumeration over outcome vectors would be too large.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Cross-validation folds lost a category.
    #[error("stratification error: {0}")]
    Stratification(String),
}

pub type Result<T> = core::result::Result<T, Error>;
