//! Radial Newton solver and pseudo-arclength continuation from the trivial
//! branch `(α, U, U)`.
//!
//! Unknowns are the conformal profiles of `z_1 = u_1 + u_2 - 2U` and
//! `z_2 = u_1 - u_2` (see [`crate::spectral`]). In that representation the system reads
//!
//! ```text
//! (-Δ_S + N(N-2)/4) v_i = f_i(c_U + …)/4,    c_U = [N(N-2)]^{(N-2)/4},
//! ```
//!
//! and is solved in fixed-point form `T(v) = v - K⁻¹ G f(v)/4 = 0`. `z_1` is kept
//! Kelvin-even and `z_2` carries the sign `(-1)^n`, so only half of the nodes
//! are unknowns; this removes the dilation mode from the kernel.

use nalgebra::{Cholesky, DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::specfun::bubble_peak;
use crate::spectral::{jacobi_profile, RadialGrid};
use crate::systems::{beta_n, fz_eval, fz_jet, Nonlinearity, SystemFamily};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    pub grid_size: usize,
    pub detect_grid_size: usize,
    pub steps: usize,
    pub ds: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Smallest admissible `min(u_1, u_2)/U`.
    pub margin_min: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            grid_size: 128,
            detect_grid_size: 200,
            steps: 20,
            ds: 0.02,
            tol: 1e-9,
            max_iter: 25,
            max_halvings: 10,
            margin_min: 1e-8,
        }
    }
}

/// Half-node unknowns and the parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub alpha: f64,
    pub x1: DVector<f64>,
    pub x2: DVector<f64>,
}

impl State {
    pub fn trivial(alpha: f64, half: usize) -> Self {
        Self { alpha, x1: DVector::zeros(half), x2: DVector::zeros(half) }
    }

    fn axpy(&self, h: f64, t: &Tangent) -> Self {
        Self { alpha: self.alpha + h * t.alpha, x1: &self.x1 + &t.x1 * h, x2: &self.x2 + &t.x2 * h }
    }
}

/// Direction in `(x_1, x_2, α)` space.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub alpha: f64,
    pub x1: DVector<f64>,
    pub x2: DVector<f64>,
}

/// A converged point on a branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub alpha: f64,
    /// Signed amplitude: energy projection of `z_2` on the normalized `W_n`.
    pub eps: f64,
    /// Conformal node values of `z_1` and `z_2`.
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub residual: f64,
    pub min_margin: f64,
    /// `‖z_1‖_X`.
    pub z1_remainder: f64,
    /// `‖z_2 - ε W_n‖_X`.
    pub z2_remainder: f64,
    pub iterations: usize,
}

/// Where the test function vanished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub alpha: f64,
    pub bracket: (f64, f64),
    /// Smallest-magnitude eigenvalue of the second block at `alpha`.
    pub test_value: f64,
    /// Cosine between the numerical null vector and the sampled `W_n`.
    pub nullvector_cosine: f64,
    pub grid_size: usize,
}

/// Points followed in one `ε` direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchArm {
    pub direction: i32,
    pub points: Vec<BranchPoint>,
    /// Why the arm stopped early, if it did.
    pub termination: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub family: String,
    pub dim: usize,
    pub n: usize,
    pub kelvin_sign: i32,
    pub options: ContinuationOptions,
    pub detection: Detection,
    pub trivial: BranchPoint,
    pub arms: Vec<BranchArm>,
}

impl Branch {
    /// Trivial point plus both arms, ordered by `ε`.
    pub fn ordered_points(&self) -> Vec<&BranchPoint> {
        let mut pts: Vec<&BranchPoint> = std::iter::once(&self.trivial)
            .chain(self.arms.iter().flat_map(|a| a.points.iter()))
            .collect();
        pts.sort_by(|a, b| a.eps.total_cmp(&b.eps));
        pts
    }

    pub fn arm(&self, direction: i32) -> Option<&BranchArm> {
        self.arms.iter().find(|a| a.direction == direction)
    }

    pub fn is_complete(&self) -> bool {
        self.arms.iter().all(|a| a.termination.is_none() && a.points.len() >= self.options.steps)
    }
}

/// `(-1)^n`, the Kelvin sign of `z_2` on the radial branch from `α*_n`.
pub fn radial_kelvin_sign(n: usize) -> i32 {
    if n.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Discretized radial system for one family and one level `n`.
pub struct RadialSolver<'a, F: Nonlinearity + ?Sized> {
    pub fam: &'a F,
    pub n: usize,
    pub sign: i32,
    pub grid: RadialGrid,
    c_u: f64,
    a_full: DMatrix<f64>,
    a_even: DMatrix<f64>,
    a_class: DMatrix<f64>,
    /// Diagonal metric on half vectors, normalized so `‖Ŵ‖ = 1`.
    metric: DVector<f64>,
    /// `W_n` in conformal form with unit X-norm.
    w_hat: Vec<f64>,
    w_energy: f64,
}

impl<'a, F: Nonlinearity + ?Sized> RadialSolver<'a, F> {
    pub fn new(fam: &'a F, n: usize, grid_size: usize) -> Result<Self> {
        let dim = fam.dim();
        let grid = RadialGrid::new(grid_size, dim)?;
        let m = grid.size();
        let h = m / 2;
        let chol = Cholesky::new(grid.stiffness())
            .ok_or_else(|| Error::Resource("stiffness matrix is not positive definite".into()))?;
        let a_full = chol.solve(&DMatrix::from_diagonal(&DVector::from_vec(grid.weights.clone()))) * 0.25;
        let sign = radial_kelvin_sign(n);
        let reduce = |s: f64| {
            DMatrix::from_fn(h, h, |i, j| a_full[(i, j)] + s * a_full[(i, grid.mirror(j))])
        };
        let a_even = reduce(1.0);
        let a_class = reduce(sign as f64);

        let mut w_hat = jacobi_profile(&grid, n);
        let scale = grid.norms(&w_hat).x_norm();
        w_hat.iter_mut().for_each(|x| *x /= scale);
        let w_energy = grid.energy_inner(&w_hat, &w_hat);
        let l2: f64 = (0..h).map(|j| 2.0 * grid.weights[j] * w_hat[j] * w_hat[j]).sum();
        let metric = DVector::from_iterator(h, (0..h).map(|j| 2.0 * grid.weights[j] / l2));
        Ok(Self { fam, n, sign, grid, c_u: bubble_peak(dim), a_full, a_even, a_class, metric, w_hat, w_energy })
    }

    pub fn half(&self) -> usize {
        self.grid.size() / 2
    }

    /// Normalized `W_n` restricted to the half nodes.
    pub fn w_hat_half(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.w_hat[..self.half()])
    }

    pub fn w_hat(&self) -> &[f64] {
        &self.w_hat
    }

    /// Full node values from half values with parity `s`.
    pub fn extend(&self, x: &DVector<f64>, s: i32) -> Vec<f64> {
        let mut v = vec![0.0; self.grid.size()];
        for j in 0..self.half() {
            v[j] = x[j];
            v[self.grid.mirror(j)] = s as f64 * x[j];
        }
        v
    }

    /// `T` on full node vectors, no parity assumed.
    pub fn residual_full(&self, alpha: f64, z1: &[f64], z2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.grid.size();
        let mut f1 = DVector::zeros(m);
        let mut f2 = DVector::zeros(m);
        for j in 0..m {
            let (a, b) = fz_eval(self.fam, alpha, self.c_u, z1[j], z2[j])?;
            f1[j] = a;
            f2[j] = b;
        }
        let t1 = DVector::from_column_slice(z1) - &self.a_full * f1;
        let t2 = DVector::from_column_slice(z2) - &self.a_full * f2;
        Ok((t1.as_slice().to_vec(), t2.as_slice().to_vec()))
    }

    /// `min(u_1, u_2)/U` over the nodes.
    pub fn margin(&self, s: &State) -> f64 {
        let mut best = f64::INFINITY;
        for j in 0..self.half() {
            let a = 1.0 + 0.5 * (s.x1[j] + s.x2[j]) / self.c_u;
            let b = 1.0 + 0.5 * (s.x1[j] - s.x2[j]) / self.c_u;
            best = best.min(a).min(b);
        }
        best
    }

    fn residual_half(&self, s: &State) -> Result<(DVector<f64>, DVector<f64>)> {
        let h = self.half();
        let mut f1 = DVector::zeros(h);
        let mut f2 = DVector::zeros(h);
        for j in 0..h {
            let (a, b) = fz_eval(self.fam, s.alpha, self.c_u, s.x1[j], s.x2[j])?;
            f1[j] = a;
            f2[j] = b;
        }
        Ok((&s.x1 - &self.a_even * f1, &s.x2 - &self.a_class * f2))
    }

    /// Sup of `|T|/c_U` over both components.
    pub fn residual_norm(&self, s: &State) -> Result<f64> {
        let (r1, r2) = self.residual_half(s)?;
        Ok(r1.amax().max(r2.amax()) / self.c_u)
    }

    /// `∂T/∂(x_1, x_2)` and `∂T/∂α` on the half-node unknowns.
    pub fn jacobian(&self, s: &State) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let h = self.half();
        let mut jy = DMatrix::identity(2 * h, 2 * h);
        let mut ja = DVector::zeros(2 * h);
        let mut d = [DVector::zeros(h), DVector::zeros(h), DVector::zeros(h), DVector::zeros(h)];
        let mut fa1 = DVector::zeros(h);
        let mut fa2 = DVector::zeros(h);
        for j in 0..h {
            let jet = fz_jet(self.fam, s.alpha, self.c_u, s.x1[j], s.x2[j])?;
            d[0][j] = jet.f1_z1;
            d[1][j] = jet.f1_z2;
            d[2][j] = jet.f2_z1;
            d[3][j] = jet.f2_z2;
            fa1[j] = jet.f1_alpha;
            fa2[j] = jet.f2_alpha;
        }
        for (block, (a, diag)) in [(&self.a_even, &d[0]), (&self.a_even, &d[1]), (&self.a_class, &d[2]), (&self.a_class, &d[3])]
            .into_iter()
            .enumerate()
        {
            let (r0, c0) = ((block / 2) * h, (block % 2) * h);
            for i in 0..h {
                for j in 0..h {
                    jy[(r0 + i, c0 + j)] -= a[(i, j)] * diag[j];
                }
            }
        }
        let g1 = &self.a_even * fa1;
        let g2 = &self.a_class * fa2;
        for i in 0..h {
            ja[i] = -g1[i];
            ja[h + i] = -g2[i];
        }
        Ok((jy, ja))
    }

    /// Second diagonal block `∂T_2/∂x_2`.
    pub fn second_block(&self, s: &State) -> Result<DMatrix<f64>> {
        let h = self.half();
        let (jy, _) = self.jacobian(s)?;
        Ok(jy.view((h, h), (h, h)).into_owned())
    }

    fn metric_dot(&self, a1: &DVector<f64>, a2: &DVector<f64>, b1: &DVector<f64>, b2: &DVector<f64>) -> f64 {
        (0..self.half()).map(|j| self.metric[j] * (a1[j] * b1[j] + a2[j] * b2[j])).sum()
    }

    /// Unit-length tangent in the solver metric.
    pub fn normalize(&self, t: Tangent) -> Tangent {
        let norm = (self.metric_dot(&t.x1, &t.x2, &t.x1, &t.x2) + t.alpha * t.alpha).sqrt();
        Tangent { alpha: t.alpha / norm, x1: t.x1 / norm, x2: t.x2 / norm }
    }

    /// Damped Newton. With `constraint = Some((tangent, predictor))` the
    /// parameter is free and `⟨τ, y - y_pred⟩ + τ_α (α - α_pred) = 0` is appended.
    pub fn newton(
        &self,
        start: State,
        constraint: Option<(&Tangent, &State)>,
        opts: &ContinuationOptions,
    ) -> Result<(State, f64, usize)> {
        let h = self.half();
        let mut s = start;
        self.check_margin(&s, opts)?;
        let mut res = self.total_residual(&s, constraint)?;
        for it in 0..=opts.max_iter {
            if res <= opts.tol {
                let r = self.residual_norm(&s)?;
                return Ok((s, r, it));
            }
            if it == opts.max_iter {
                break;
            }
            let (r1, r2) = self.residual_half(&s)?;
            let (jy, ja) = self.jacobian(&s)?;
            let step = match constraint {
                None => {
                    let mut rhs = DVector::zeros(2 * h);
                    rhs.rows_mut(0, h).copy_from(&r1);
                    rhs.rows_mut(h, h).copy_from(&r2);
                    let dx = LU::new(jy).solve(&rhs).ok_or_else(|| singular(it, res))?;
                    (dx, 0.0)
                }
                Some((t, pred)) => {
                    let n = 2 * h + 1;
                    let mut mat = DMatrix::zeros(n, n);
                    mat.view_mut((0, 0), (2 * h, 2 * h)).copy_from(&jy);
                    mat.view_mut((0, 2 * h), (2 * h, 1)).copy_from(&ja);
                    for j in 0..h {
                        mat[(2 * h, j)] = self.metric[j] * t.x1[j];
                        mat[(2 * h, h + j)] = self.metric[j] * t.x2[j];
                    }
                    mat[(2 * h, 2 * h)] = t.alpha;
                    let mut rhs = DVector::zeros(n);
                    rhs.rows_mut(0, h).copy_from(&r1);
                    rhs.rows_mut(h, h).copy_from(&r2);
                    rhs[2 * h] = self.constraint_value(&s, t, pred);
                    let dx = LU::new(mat).solve(&rhs).ok_or_else(|| singular(it, res))?;
                    let da = dx[2 * h];
                    (dx.rows(0, 2 * h).into_owned(), da)
                }
            };
            let mut lambda = 1.0;
            let mut accepted = None;
            let mut last_err = None;
            for _ in 0..8 {
                let trial = State {
                    alpha: s.alpha - lambda * step.1,
                    x1: &s.x1 - step.0.rows(0, h) * lambda,
                    x2: &s.x2 - step.0.rows(h, h) * lambda,
                };
                match self.check_margin(&trial, opts).and_then(|_| self.total_residual(&trial, constraint)) {
                    Ok(r) if r < res || lambda == 1.0 && r <= 2.0 * res => {
                        accepted = Some((trial, r));
                        break;
                    }
                    Ok(_) => {}
                    Err(e) => last_err = Some(e),
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((t, r)) => {
                    s = t;
                    res = r;
                }
                None => return Err(last_err.unwrap_or(Error::Convergence { iterations: it + 1, residual: res })),
            }
        }
        Err(Error::Convergence { iterations: opts.max_iter, residual: res })
    }

    fn check_margin(&self, s: &State, opts: &ContinuationOptions) -> Result<()> {
        let margin = self.margin(s);
        if !(margin >= opts.margin_min) {
            return Err(Error::ConeExit { margin });
        }
        Ok(())
    }

    fn constraint_value(&self, s: &State, t: &Tangent, pred: &State) -> f64 {
        let d1 = &s.x1 - &pred.x1;
        let d2 = &s.x2 - &pred.x2;
        self.metric_dot(&t.x1, &t.x2, &d1, &d2) + t.alpha * (s.alpha - pred.alpha)
    }

    fn total_residual(&self, s: &State, constraint: Option<(&Tangent, &State)>) -> Result<f64> {
        let r = self.residual_norm(s)?;
        Ok(match constraint {
            Some((t, pred)) => r.max(self.constraint_value(s, t, pred).abs()),
            None => r,
        })
    }

    /// `ε`: energy projection of `z_2` on the normalized `W_n`.
    pub fn amplitude(&self, z2: &[f64]) -> f64 {
        self.grid.energy_inner(z2, &self.w_hat) / self.w_energy
    }

    /// Packages a converged state.
    pub fn point(&self, s: &State, residual: f64, iterations: usize) -> BranchPoint {
        let z1 = self.extend(&s.x1, 1);
        let z2 = self.extend(&s.x2, self.sign);
        let eps = self.amplitude(&z2);
        let rem: Vec<f64> = z2.iter().zip(&self.w_hat).map(|(a, b)| a - eps * b).collect();
        BranchPoint {
            alpha: s.alpha,
            eps,
            z1_remainder: self.grid.norms(&z1).x_norm(),
            z2_remainder: self.grid.norms(&rem).x_norm(),
            z1,
            z2,
            residual,
            min_margin: self.margin(s),
            iterations,
        }
    }

    /// Energy cosine between `z_2` and `W_n`.
    pub fn tangent_correlation(&self, z2: &[f64]) -> f64 {
        let zz = self.grid.energy_inner(z2, z2);
        if zz == 0.0 {
            return 0.0;
        }
        self.grid.energy_inner(z2, &self.w_hat) / (zz * self.w_energy).sqrt()
    }
}

fn singular(it: usize, res: f64) -> Error {
    Error::Convergence { iterations: it + 1, residual: res }
}

/// `T` at `(α, z_1, z_2)` given as full node vectors on a fresh grid.
pub fn residual<F: Nonlinearity + ?Sized>(
    fam: &F,
    alpha: f64,
    grid_size: usize,
    z1: &[f64],
    z2: &[f64],
    margin_min: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let solver = RadialSolver::new(fam, 0, grid_size)?;
    let c = bubble_peak(fam.dim());
    let margin = z1
        .iter()
        .zip(z2)
        .map(|(a, b)| (1.0 + 0.5 * (a + b) / c).min(1.0 + 0.5 * (a - b) / c))
        .fold(f64::INFINITY, f64::min);
    if !(margin >= margin_min) {
        return Err(Error::ConeExit { margin });
    }
    solver.residual_full(alpha, z1, z2)
}

/// Newton from `start` at fixed `α` or along an arclength constraint.
pub fn newton_correct<F: Nonlinearity + ?Sized>(
    solver: &RadialSolver<'_, F>,
    start: State,
    constraint: Option<(&Tangent, &State)>,
    opts: &ContinuationOptions,
) -> Result<BranchPoint> {
    let (s, r, it) = solver.newton(start, constraint, opts)?;
    Ok(solver.point(&s, r, it))
}

/// Smallest-magnitude eigenvalue of the second block at the trivial solution.
pub fn test_function<F: Nonlinearity + ?Sized>(solver: &RadialSolver<'_, F>, alpha: f64) -> Result<f64> {
    let block = solver.second_block(&State::trivial(alpha, solver.half()))?;
    let eig = block.complex_eigenvalues();
    let best = eig
        .iter()
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))
        .ok_or_else(|| Error::Detection("empty spectrum".into()))?;
    Ok(best.re)
}

/// Singular values of the second block at the trivial solution, ascending.
pub fn second_block_singular_values<F: Nonlinearity + ?Sized>(
    solver: &RadialSolver<'_, F>,
    alpha: f64,
) -> Result<Vec<f64>> {
    let block = solver.second_block(&State::trivial(alpha, solver.half()))?;
    let mut sv: Vec<f64> = block.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| a.total_cmp(b));
    Ok(sv)
}

/// Bisection on the sign of [`test_function`] inside `interval`.
pub fn detect_bifurcation<F: Nonlinearity + ?Sized>(
    fam: &F,
    n: usize,
    interval: (f64, f64),
    grid_size: usize,
) -> Result<Detection> {
    let solver = RadialSolver::new(fam, n, grid_size)?;
    let (mut lo, mut hi) = (interval.0.min(interval.1), interval.0.max(interval.1));
    let mut f_lo = test_function(&solver, lo)?;
    let f_hi = test_function(&solver, hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Detection(format!(
            "test function keeps its sign on [{lo}, {hi}] ({f_lo:.3e}, {f_hi:.3e})"
        )));
    }
    while hi - lo > 1e-12 * (1.0 + lo.abs()) {
        let mid = 0.5 * (lo + hi);
        let f_mid = test_function(&solver, mid)?;
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let value = test_function(&solver, alpha)?;
    if value.abs() > 1e-6 {
        return Err(Error::Detection(format!(
            "sign change at α = {alpha} is a jump between eigenvalues, not a zero ({value:.3e})"
        )));
    }
    // Compare the numerical null vector with W_n.
    let block = solver.second_block(&State::trivial(alpha, solver.half()))?;
    let svd = block.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Detection("SVD failed".into()))?;
    let idx = svd.singular_values.imin();
    let null: DVector<f64> = vt.row(idx).transpose();
    let w = solver.w_hat_half();
    let g = &solver.grid.weights;
    let dot = |a: &DVector<f64>, b: &DVector<f64>| (0..a.len()).map(|j| g[j] * a[j] * b[j]).sum::<f64>();
    let cosine = dot(&null, &w).abs() / (dot(&null, &null) * dot(&w, &w)).sqrt();
    Ok(Detection {
        alpha,
        bracket: interval,
        test_value: value,
        nullvector_cosine: cosine,
        grid_size: solver.grid.size(),
    })
}

/// Bracket around `α*_n` on which the level-`n` eigenvalue stays the one of
/// smallest magnitude: half the way, in `β`, to the harmonic mean with the
/// neighbouring level of the same parity.
pub fn default_bracket<F: Nonlinearity + ?Sized>(fam: &F, n: usize) -> Result<(f64, f64)> {
    let dim = fam.dim();
    let a = fam.alpha_star(n)?;
    let reach = |m: usize| -> Result<f64> {
        let (bn, bm) = (beta_n(dim, n), beta_n(dim, m));
        let mean = 2.0 * bn * bm / (bn + bm);
        Ok(0.5 * ((mean - bn) / (bm - bn)).abs() * (fam.alpha_star(m)? - a).abs())
    };
    let mut half = reach(n + 2)?;
    if n >= 2 {
        half = half.min(reach(n - 2)?);
    }
    Ok((a - half, a + half))
}

/// Trivial branch: fixed-`α` Newton from `(0, 0)` at each `α`.
pub fn continue_trivial<F: Nonlinearity + ?Sized>(
    fam: &F,
    n: usize,
    alphas: &[f64],
    opts: &ContinuationOptions,
) -> Result<Vec<BranchPoint>> {
    let solver = RadialSolver::new(fam, n, opts.grid_size)?;
    alphas
        .iter()
        .map(|&a| newton_correct(&solver, State::trivial(a, solver.half()), None, opts))
        .collect()
}

/// Detects `α*_n`, switches onto the radial branch along `(0, W_n)` and follows
/// it for `opts.steps` steps in both `ε` directions.
pub fn continue_branch<F: Nonlinearity + ?Sized>(fam: &F, n: usize, opts: &ContinuationOptions) -> Result<Branch> {
    let bracket = default_bracket(fam, n)?;
    let detection = detect_bifurcation(fam, n, bracket, opts.detect_grid_size)?;
    continue_from(fam, n, detection, opts)
}

/// Branch switching and continuation from a known detection record.
pub fn continue_from<F: Nonlinearity + ?Sized>(
    fam: &F,
    n: usize,
    detection: Detection,
    opts: &ContinuationOptions,
) -> Result<Branch> {
    let solver = RadialSolver::new(fam, n, opts.grid_size)?;
    let h = solver.half();
    let origin = State::trivial(detection.alpha, h);
    let (origin, r0, it0) = solver.newton(origin, None, opts)?;
    let trivial = solver.point(&origin, r0, it0);

    let mut arms = Vec::new();
    for direction in [1, -1] {
        let first = Tangent {
            alpha: 0.0,
            x1: DVector::zeros(h),
            x2: solver.w_hat_half() * direction as f64,
        };
        arms.push(follow_arm(&solver, &origin, first, direction, opts));
    }
    Ok(Branch {
        family: fam.label(),
        dim: fam.dim(),
        n,
        kelvin_sign: solver.sign,
        options: *opts,
        detection,
        trivial,
        arms,
    })
}

fn follow_arm<F: Nonlinearity + ?Sized>(
    solver: &RadialSolver<'_, F>,
    origin: &State,
    first: Tangent,
    direction: i32,
    opts: &ContinuationOptions,
) -> BranchArm {
    let mut points = Vec::new();
    let mut prev = origin.clone();
    let mut tangent = solver.normalize(first);
    let mut ds = opts.ds;
    let mut halvings = 0;
    let mut termination = None;
    while points.len() < opts.steps {
        let pred = prev.axpy(ds, &tangent);
        match solver.newton(pred.clone(), Some((&tangent, &pred)), opts) {
            Ok((s, r, it)) => {
                let secant = Tangent {
                    alpha: s.alpha - prev.alpha,
                    x1: &s.x1 - &prev.x1,
                    x2: &s.x2 - &prev.x2,
                };
                tangent = solver.normalize(secant);
                points.push(solver.point(&s, r, it));
                prev = s;
                ds = (2.0 * ds).min(opts.ds);
            }
            Err(e) => {
                halvings += 1;
                if halvings > opts.max_halvings {
                    termination = Some(format!("step {} failed after {} halvings: {e}", points.len() + 1, opts.max_halvings));
                    break;
                }
                ds *= 0.5;
            }
        }
    }
    BranchArm { direction, points, termination }
}

/// Expansion diagnostics for one branch point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub alpha: f64,
    pub eps: f64,
    pub z2_remainder: f64,
    pub z1_remainder: f64,
    /// `‖z_2 - ε W_n‖_X / |ε|`.
    pub z2_ratio: f64,
    /// `‖z_1‖_X / |ε|`.
    pub z1_ratio: f64,
}

/// Per-point `(ε, remainders, ratios)`, ordered by `ε`; ratios are zero at `ε = 0`.
pub fn extract_expansion(branch: &Branch) -> Vec<ExpansionRow> {
    branch
        .ordered_points()
        .into_iter()
        .map(|p| {
            let ratio = |x: f64| if p.eps == 0.0 { 0.0 } else { x / p.eps.abs() };
            ExpansionRow {
                alpha: p.alpha,
                eps: p.eps,
                z2_remainder: p.z2_remainder,
                z1_remainder: p.z1_remainder,
                z2_ratio: ratio(p.z2_remainder),
                z1_ratio: ratio(p.z1_remainder),
            }
        })
        .collect()
}

/// One independent continuation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchJob {
    pub family: SystemFamily,
    pub n: usize,
    pub options: ContinuationOptions,
}

/// Runs independent branches concurrently; results follow the job order.
pub fn run_branches(jobs: &[BranchJob], mode: Execution) -> Vec<Result<Branch>> {
    exec::map(mode, jobs, |job| continue_branch(&job.family, job.n, &job.options))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::x_norm;

    fn gp3() -> SystemFamily {
        SystemFamily::gross_pitaevskii(3).unwrap()
    }

    #[test]
    fn trivial_residual_vanishes() {
        for fam in [gp3(), SystemFamily::druet_hebey(4).unwrap(), SystemFamily::schrodinger(0.5, 5).unwrap()] {
            let solver = RadialSolver::new(&fam, 2, 64).unwrap();
            for i in 0..20 {
                let alpha = -2.0 + 0.3 * i as f64;
                let r = solver.residual_norm(&State::trivial(alpha, 32)).unwrap();
                assert!(r <= 1e-12, "{fam} α={alpha} r={r}");
            }
        }
    }

    #[test]
    fn residual_symmetries() {
        let fam = gp3();
        let g = RadialGrid::new(32, 3).unwrap();
        let z1: Vec<f64> = g.nodes.iter().map(|t| 0.1 * (1.0 - t * t) + 0.05 * t).collect();
        let z2: Vec<f64> = g.nodes.iter().map(|t| 0.2 * t * t - 0.1 * t).collect();
        let (a1, a2) = residual(&fam, 1.7, 32, &z1, &z2, 1e-8).unwrap();
        let neg: Vec<f64> = z2.iter().map(|x| -x).collect();
        let (b1, b2) = residual(&fam, 1.7, 32, &z1, &neg, 1e-8).unwrap();
        for j in 0..32 {
            assert!((a1[j] - b1[j]).abs() < 1e-14);
            assert!((a2[j] + b2[j]).abs() < 1e-14);
        }
        // Kelvin-projected inputs give Kelvin-projected residuals.
        for sign in [1, -1] {
            let (p1, p2) = (g.project(&z1, 1), g.project(&z2, sign));
            let (r1, r2) = residual(&fam, 1.7, 32, &p1, &p2, 1e-8).unwrap();
            let (e1, e2) = (g.project(&r1, -1), g.project(&r2, -sign));
            assert!(e1.iter().chain(&e2).all(|x| x.abs() < 1e-13));
        }
        let (z0, _) = residual(&fam, 0.3, 32, &vec![0.0; 32], &vec![0.0; 32], 1e-8).unwrap();
        assert!(z0.iter().all(|x| x.abs() < 1e-12));
        let big = vec![-3.0 * bubble_peak(3); 32];
        assert!(matches!(residual(&fam, 0.3, 32, &big, &vec![0.0; 32], 1e-8), Err(Error::ConeExit { .. })));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for fam in [gp3(), SystemFamily::druet_hebey(5).unwrap()] {
            let solver = RadialSolver::new(&fam, 2, 32).unwrap();
            let h = solver.half();
            let s = State {
                alpha: 1.9,
                x1: DVector::from_fn(h, |j, _| 0.05 * (j as f64 * 0.3).sin()),
                x2: DVector::from_fn(h, |j, _| 0.08 * (j as f64 * 0.2).cos()),
            };
            let (jy, ja) = solver.jacobian(&s).unwrap();
            let flat = |s: &State| {
                let (a, b) = solver.residual_half(s).unwrap();
                let mut v = a.as_slice().to_vec();
                v.extend_from_slice(b.as_slice());
                v
            };
            let eps = 1e-6;
            for col in (0..2 * h).step_by(5) {
                let mut p = s.clone();
                let mut m = s.clone();
                if col < h {
                    p.x1[col] += eps;
                    m.x1[col] -= eps;
                } else {
                    p.x2[col - h] += eps;
                    m.x2[col - h] -= eps;
                }
                let (fp, fm) = (flat(&p), flat(&m));
                for row in 0..2 * h {
                    let fd = (fp[row] - fm[row]) / (2.0 * eps);
                    assert!((jy[(row, col)] - fd).abs() < 1e-5, "{fam} ({row},{col})");
                }
            }
            let mut p = s.clone();
            let mut m = s.clone();
            p.alpha += eps;
            m.alpha -= eps;
            let (fp, fm) = (flat(&p), flat(&m));
            for row in 0..2 * h {
                assert!((ja[row] - (fp[row] - fm[row]) / (2.0 * eps)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn newton_keeps_trivial_point() {
        let fam = gp3();
        let opts = ContinuationOptions { grid_size: 64, ..Default::default() };
        let solver = RadialSolver::new(&fam, 2, 64).unwrap();
        for alpha in [0.5, 1.3, 3.0] {
            let p = newton_correct(&solver, State::trivial(alpha, 32), None, &opts).unwrap();
            assert_eq!(p.eps, 0.0);
            assert_eq!(p.iterations, 0);
        }
    }

    #[test]
    fn newton_switches_onto_the_branch() {
        let fam = gp3();
        let opts = ContinuationOptions { grid_size: 64, ..Default::default() };
        let solver = RadialSolver::new(&fam, 2, 64).unwrap();
        let a = fam.alpha_star(2);
        let t = solver.normalize(Tangent { alpha: 0.0, x1: DVector::zeros(32), x2: solver.w_hat_half() });
        let pred = State { alpha: a, x1: DVector::zeros(32), x2: solver.w_hat_half() * 1e-3 };
        let p = newton_correct(&solver, pred.clone(), Some((&t, &pred)), &opts).unwrap();
        assert!((p.eps - 1e-3).abs() < 1e-6, "{}", p.eps);
        assert!(p.residual <= 1e-9);
    }

    #[test]
    fn detection_examples() {
        let gp = gp3();
        let d = detect_bifurcation(&gp, 2, (2.0, 2.2), 200).unwrap();
        assert!((d.alpha - 19.0 / 9.0).abs() <= 1e-6);
        assert!(d.nullvector_cosine > 1.0 - 1e-8);
        let dh = SystemFamily::druet_hebey(4).unwrap();
        let d = detect_bifurcation(&dh, 1, (0.9, 1.1), 200).unwrap();
        assert!((d.alpha - 1.0).abs() <= 1e-6);
        assert!(matches!(detect_bifurcation(&gp, 2, (1.5, 1.9), 64), Err(Error::Detection(_))));
    }

    #[test]
    fn detection_rejects_eigenvalue_jumps() {
        // β(α) midway between β_0 and β_2 for N = 3 flips the sign of the
        // smallest-magnitude eigenvalue without a zero.
        let gp = gp3();
        let lo = gp.alpha_star(0) + 0.05;
        let hi = gp.alpha_star(2) - 0.05;
        assert!(matches!(detect_bifurcation(&gp, 2, (lo, hi), 64), Err(Error::Detection(_))));
    }

    #[test]
    fn null_space_is_isolated() {
        let fam = gp3();
        let solver = RadialSolver::new(&fam, 2, 64).unwrap();
        let sv = second_block_singular_values(&solver, fam.alpha_star(2)).unwrap();
        assert!(sv[1] >= 1e3 * sv[0], "{:?}", &sv[..3]);
    }

    #[test]
    fn trivial_continuation_has_zero_amplitude() {
        let fam = gp3();
        let opts = ContinuationOptions { grid_size: 64, ..Default::default() };
        let alphas: Vec<f64> = (0..=10).map(|i| 1.5 + 0.05 * i as f64).collect();
        for p in continue_trivial(&fam, 2, &alphas, &opts).unwrap() {
            assert_eq!(p.eps, 0.0);
            assert_eq!(p.z1_remainder, 0.0);
        }
    }

    #[test]
    fn short_branch_is_symmetric() {
        let fam = gp3();
        let opts = ContinuationOptions { grid_size: 64, detect_grid_size: 64, steps: 4, ..Default::default() };
        let b = continue_branch(&fam, 2, &opts).unwrap();
        assert!(b.is_complete());
        let (plus, minus) = (b.arm(1).unwrap(), b.arm(-1).unwrap());
        for (p, m) in plus.points.iter().zip(&minus.points) {
            assert!((p.eps + m.eps).abs() < 1e-8);
            assert!((p.alpha - m.alpha).abs() < 1e-8);
            assert!(p.residual <= 1e-9 && p.min_margin > 0.0);
        }
        // Swapping u1 and u2 maps a solution to a solution.
        let solver = RadialSolver::new(&fam, 2, 64).unwrap();
        let p = &plus.points[2];
        let neg: Vec<f64> = p.z2.iter().map(|x| -x).collect();
        let (r1, r2) = solver.residual_full(p.alpha, &p.z1, &neg).unwrap();
        assert!(r1.iter().chain(&r2).all(|x| x.abs() < 1e-9));
        assert!(solver.tangent_correlation(&plus.points[0].z2).abs() >= 0.999);
        let rows = extract_expansion(&b);
        assert_eq!(rows.len(), 9);
        assert!(x_norm(&solver.grid, solver.w_hat()) - 1.0 < 1e-12);
    }

    #[test]
    fn run_branches_in_both_modes() {
        let opts = ContinuationOptions { grid_size: 32, detect_grid_size: 32, steps: 2, ..Default::default() };
        let jobs = vec![
            BranchJob { family: gp3(), n: 2, options: opts },
            BranchJob { family: SystemFamily::druet_hebey(4).unwrap(), n: 1, options: opts },
        ];
        let a = run_branches(&jobs, Execution::Sequential);
        let b = run_branches(&jobs, Execution::Parallel);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.as_ref().unwrap(), y.as_ref().unwrap());
        }
    }
}
