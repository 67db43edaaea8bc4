//! Linearization checks for one dimension: analytic eigen-residuals, the
//! discrete pencil, Kelvin parity and the harmonic-dimension oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::specfun::{kelvin_apply, RadialEigenfunction};
use crate::spectral::{eigen_residual_analytic, residual_radii, spectrum_sweep, RadialGrid, SpectrumCheck};
use crate::symmetry::{oracle_sweep, OracleRow};

pub const VERIFY_MAX_N: usize = 8;
pub const ANALYTIC_TOL: f64 = 1e-9;
pub const EIGEN_TOL: f64 = 1e-6;
pub const KELVIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub dim: usize,
    pub n_max: usize,
    pub grid_size: usize,
    /// Largest angular index of the discrete pencil checks.
    pub k_max: usize,
    /// Largest `m` in the oracle cross-check.
    pub m_max: usize,
}

impl VerifyOptions {
    pub fn new(dim: usize, n_max: usize) -> Self {
        Self { dim, n_max, grid_size: 256, k_max: 3, m_max: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeResidual {
    pub n: usize,
    pub k: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KelvinRow {
    pub n: usize,
    pub k: usize,
    pub sign: i32,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub analytic: Vec<ModeResidual>,
    pub spectrum: Vec<SpectrumCheck>,
    pub kelvin: Vec<KelvinRow>,
    pub oracle: Vec<OracleRow>,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Largest relative deviation of `W_{n,k}` from `sign · K[W_{n,k}]`.
pub fn kelvin_parity_error(dim: usize, n: usize, k: usize) -> Result<(i32, f64)> {
    let e = RadialEigenfunction::new(dim, n, k)?;
    let sign = e.kelvin_sign();
    let radii = residual_radii();
    let sup = radii.iter().fold(0.0f64, |m, &r| m.max(e.eval(r).abs()));
    let mut worst = 0.0f64;
    for &r in &radii {
        let k_val = kelvin_apply(dim, |s| e.eval(s), r)?;
        worst = worst.max((k_val - sign as f64 * e.eval(r)).abs() / sup);
    }
    Ok((sign, worst))
}

pub fn run_verify(opts: &VerifyOptions, mode: Execution) -> Result<VerifyReport> {
    if opts.dim < 3 {
        return Err(Error::Domain(format!("dimension must be at least 3 (got {})", opts.dim)));
    }
    if opts.n_max > VERIFY_MAX_N {
        return Err(Error::Domain(format!("n_max must be at most {VERIFY_MAX_N} (got {})", opts.n_max)));
    }
    let dim = opts.dim;
    let modes: Vec<(usize, usize)> = (0..=opts.n_max).flat_map(|n| (0..=n).map(move |k| (n, k))).collect();

    let analytic = exec::try_map(mode, &modes, |&(n, k)| {
        Ok::<_, Error>(ModeResidual { n, k, residual: eigen_residual_analytic(dim, n, k)? })
    })?;
    let kelvin = exec::try_map(mode, &modes, |&(n, k)| {
        let (sign, error) = kelvin_parity_error(dim, n, k)?;
        Ok::<_, Error>(KelvinRow { n, k, sign, error })
    })?;
    let grid = RadialGrid::new(opts.grid_size, dim)?;
    let spectrum = spectrum_sweep(dim, &grid, opts.k_max, opts.n_max, mode)?;
    let oracle = oracle_sweep(&[dim], opts.m_max, opts.n_max, mode)?;

    let max_analytic = analytic.iter().fold(0.0f64, |m, r| m.max(r.residual));
    let max_eigen = spectrum.iter().fold(0.0f64, |m, s| m.max(s.max_error()));
    let max_kelvin = kelvin.iter().fold(0.0f64, |m, r| m.max(r.error));
    let parity_failures = spectrum.iter().flat_map(|s| &s.levels).filter(|l| !l.3).count();
    let oracle_failures = oracle.iter().filter(|r| r.closed_form != r.oracle).count();
    let outcome = |name: &str, value: f64, tolerance: f64| CheckOutcome {
        name: name.into(),
        passed: value <= tolerance,
        value,
        tolerance,
    };
    let checks = vec![
        outcome("analytic_residual", max_analytic, ANALYTIC_TOL),
        outcome("discrete_eigenvalues", max_eigen, EIGEN_TOL),
        outcome("kelvin_parity", max_kelvin, KELVIN_TOL),
        outcome("eigenvector_parity", parity_failures as f64, 0.0),
        outcome("oracle_dims", oracle_failures as f64, 0.0),
    ];
    Ok(VerifyReport { options: *opts, analytic, spectrum, kelvin, oracle, checks })
}
