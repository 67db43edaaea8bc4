//! Bifurcation structure of critical elliptic 2x2 systems
//!
//! ```text
//! -Δu1 = F1(α, u1, u2),  -Δu2 = F2(α, u1, u2)   in R^N
//! ```
//!
//! around the trivial solution `u1 = u2 = U` (the Talenti bubble).
//!
//! * [`specfun`]: Jacobi polynomials, the bubble, radial kernel functions,
//!   invariant harmonics and the Kelvin transform.
//! * [`systems`]: the Schrödinger, Gross–Pitaevskii and Druet–Hebey
//!   nonlinearities, `β(α)`, `β_n`, `α*_n` and runtime assumption checks.
//! * [`symmetry`]: invariant harmonic dimensions, the exact Laplacian-nullspace
//!   oracle, `γ(n)`, Morse indices and solution counts.
//! * [`spectral`]: compactified radial grid, linearized pencil and analytic
//!   eigen-residuals.
//! * [`continuation`]: radial Newton solver and pseudo-arclength continuation
//!   of the bifurcating branches.
//! * [`verify`]: aggregated linearization checks for one dimension.

pub mod continuation;
pub mod error;
pub mod exec;
pub mod spectral;
pub mod specfun;
pub mod symmetry;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
