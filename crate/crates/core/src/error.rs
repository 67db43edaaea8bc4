use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The query is well formed but not covered by the implemented theory.
    #[error("unsupported query: {0}")]
    Unsupported(String),

    /// A size guard was hit (grid too small, oracle degree too large).
    #[error("resource guard: {0}")]
    Resource(String),

    /// A state left the positivity cone `min(u1, u2) > 0`.
    #[error("positivity cone exit: min(u1,u2)/U = {margin:.3e}")]
    ConeExit { margin: f64 },

    /// The parameter sits on a degenerate value `beta(alpha) = beta_j`.
    #[error("degenerate parameter: beta(alpha) = {beta} coincides with beta_{index}")]
    Degenerate { beta: f64, index: usize },

    /// Newton iteration did not reach the requested tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    /// Bifurcation detection failed to bracket a root.
    #[error("detection failure: {0}")]
    Detection(String),
}

pub type Result<T> = std::result::Result<T, Error>;
