//! Radial discretization in the compactified coordinate `t = (1-r²)/(1+r²)`.
//!
//! A radial profile `z` on `R^N` is stored in its conformal representation
//! `v(t)` with `z(r) = (1+r²)^{-(N-2)/2} v(t)`; the bubble becomes the constant
//! `v ≡ [N(N-2)]^{(N-2)/4}`. For angular index `k` the eigenproblem
//! `-Δw = β U^{4/(N-2)} w` becomes, with `v = (1-t²)^{k/2} p(t)`,
//!
//! ```text
//! ∫ (1-t²)^{a+1} p' q' + c ∫ (1-t²)^a p q = μ ∫ (1-t²)^a p q,   a = k + (N-2)/2,
//! c = k(k+N-1) + N(N-2)/4,   β = 4μ / (N(N-2)).
//! ```
//!
//! Nodes are Gauss–Gegenbauer points for the weight `(1-t²)^a`, so the Galerkin
//! pencil on polynomials of degree `< M` is integrated exactly and its
//! eigenvalues are the first `M` levels `β_k, β_{k+1}, …` up to round-off.
//! `t ↦ -t` is the Kelvin transform.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::specfun::{bubble_peak, bubble_weight, jacobi_deriv, jacobi_eval, JacobiParams, RadialEigenfunction};
use crate::systems::beta_n;

/// Smallest accepted grid.
pub const MIN_GRID: usize = 16;

/// Number of sample radii used by [`eigen_residual_analytic`].
pub const RESIDUAL_SAMPLES: usize = 400;
pub const RESIDUAL_R_MIN: f64 = 1e-3;
pub const RESIDUAL_R_MAX: f64 = 50.0;

/// `∫_{-1}^{1} (1-t²)^λ dt` for integer or half-integer `λ ≥ 0`.
fn gegenbauer_mass(lambda: f64) -> f64 {
    let twice = (2.0 * lambda).round() as i64;
    let (mut a, mut value) = if twice % 2 == 0 { (0.0, 2.0) } else { (0.5, std::f64::consts::FRAC_PI_2) };
    while a < lambda - 1e-9 {
        a += 1.0;
        value *= 2.0 * a / (2.0 * a + 1.0);
    }
    value
}

/// `|S^{N-1}| = 2 π^{N/2} / Γ(N/2)`.
pub fn sphere_area(dim: usize) -> f64 {
    use std::f64::consts::PI;
    // |S^d| = 2π/(d-1) |S^{d-2}|
    let mut areas = vec![2.0, 2.0 * PI];
    for d in 2..dim {
        areas.push(2.0 * PI / (d - 1) as f64 * areas[d - 2]);
    }
    areas[dim - 1]
}

/// Nodes, quadrature and differentiation on the compactified radial line.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub dim: usize,
    /// Angular index the quadrature is built for; radial profiles use `k = 0`.
    pub k: usize,
    /// Ascending nodes in `(-1, 1)`, symmetric under `t ↦ -t`.
    pub nodes: Vec<f64>,
    /// Gauss weights for `(1-t²)^{k+(N-2)/2}`.
    pub weights: Vec<f64>,
    /// Radii `r_j = sqrt((1-t_j)/(1+t_j))`.
    pub radii: Vec<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    log_bary: Vec<f64>,
    bary_sign: Vec<f64>,
}

/// Builds a grid of `size` nodes for `R^dim`.
pub fn build_grid(size: usize, dim: usize) -> Result<RadialGrid> {
    RadialGrid::new(size, dim)
}

impl RadialGrid {
    pub fn new(size: usize, dim: usize) -> Result<Self> {
        Self::with_angular_index(size, dim, 0)
    }

    /// Grid whose quadrature carries the extra weight `(1-t²)^k`.
    pub fn with_angular_index(size: usize, dim: usize, k: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::Domain(format!("dimension must be at least 3 (got {dim})")));
        }
        if size < MIN_GRID || !size.is_multiple_of(2) {
            return Err(Error::Resource(format!(
                "grid size must be even and at least {MIN_GRID} (got {size})"
            )));
        }
        let lambda = k as f64 + (dim as f64 - 2.0) / 2.0;
        let (nodes, weights) = gauss_gegenbauer(size, lambda);
        let radii = nodes.iter().map(|&t| ((1.0 - t) / (1.0 + t)).sqrt()).collect();

        let m = size;
        let mut log_bary = vec![0.0; m];
        let mut bary_sign = vec![0.0; m];
        for j in 0..m {
            log_bary[j] = -(0..m).filter(|&i| i != j).map(|i| (nodes[j] - nodes[i]).abs().ln()).sum::<f64>();
            bary_sign[j] = if (m - 1 - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        }
        let mut d1 = DMatrix::zeros(m, m);
        for i in 0..m {
            let mut diag = 0.0;
            for j in 0..m {
                if i != j {
                    let v = bary_sign[i] * bary_sign[j] * (log_bary[j] - log_bary[i]).exp()
                        / (nodes[i] - nodes[j]);
                    d1[(i, j)] = v;
                    diag -= v;
                }
            }
            d1[(i, i)] = diag;
        }
        let d2 = &d1 * &d1;
        Ok(Self { dim, k, nodes, weights, radii, d1, d2, log_bary, bary_sign })
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// Index of the node `-t_j`.
    pub fn mirror(&self, j: usize) -> usize {
        self.size() - 1 - j
    }

    /// Value at `t` of the degree `M-1` interpolant of `values`.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        if let Some(j) = self.nodes.iter().position(|&x| x == t) {
            return values[j];
        }
        let shift = self
            .nodes
            .iter()
            .zip(&self.log_bary)
            .map(|(&x, &l)| l - (t - x).abs().ln())
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..self.size() {
            let c = self.bary_sign[j] * (self.log_bary[j] - shift).exp() / (t - self.nodes[j]);
            num += c * values[j];
            den += c;
        }
        num / den
    }

    pub fn differentiate(&self, values: &[f64]) -> Vec<f64> {
        (&self.d1 * DVector::from_column_slice(values)).as_slice().to_vec()
    }

    /// `(v ± v∘mirror)/2`: `parity = 1` keeps the Kelvin-even part, `-1` the odd part.
    pub fn project(&self, values: &[f64], parity: i32) -> Vec<f64> {
        let s = parity as f64;
        (0..self.size()).map(|j| 0.5 * (values[j] + s * values[self.mirror(j)])).collect()
    }

    /// Orthonormal basis (columns) of the parity subspace, indexed by the first half of the nodes.
    pub fn parity_basis(&self, parity: i32) -> DMatrix<f64> {
        let m = self.size();
        let h = m / 2;
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let mut e = DMatrix::zeros(m, h);
        for j in 0..h {
            e[(j, j)] = c;
            e[(self.mirror(j), j)] = parity as f64 * c;
        }
        e
    }

    /// `∫_{R^N} g(|x|) dx`.
    pub fn integrate_rn<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let n = self.dim as i32;
        let sum: f64 = (0..self.size())
            .map(|j| {
                let (t, r) = (self.nodes[j], self.radii[j]);
                self.weights[j] * g(r) * (0.5 * (1.0 + r * r)).powi(n)
                    / (1.0 - t * t).powi(self.k as i32)
            })
            .sum();
        sphere_area(self.dim) * sum
    }

    /// Conformal factor `(1+r²)^{(N-2)/2}` at node `j`.
    pub fn conformal_factor(&self, j: usize) -> f64 {
        let r = self.radii[j];
        (1.0 + r * r).powf((self.dim as f64 - 2.0) / 2.0)
    }

    /// Samples a physical radial profile into the conformal representation.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.size()).map(|j| f(self.radii[j]) * self.conformal_factor(j)).collect()
    }

    /// Physical values `z(r_j)` of a conformal profile.
    pub fn physical(&self, values: &[f64]) -> Vec<f64> {
        (0..self.size()).map(|j| values[j] / self.conformal_factor(j)).collect()
    }

    /// Diagonal of the mass matrix (the Gauss weights).
    pub fn mass_diag(&self) -> Vec<f64> {
        self.weights.clone()
    }

    /// `Dᵀ diag(w (1-t²)) D + c diag(w)` with `c = k(k+N-1) + N(N-2)/4`.
    pub fn stiffness(&self) -> DMatrix<f64> {
        let n = self.dim as f64;
        let kf = self.k as f64;
        let c = kf * (kf + n - 1.0) + n * (n - 2.0) / 4.0;
        let flux = DVector::from_iterator(
            self.size(),
            self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * (1.0 - t * t)),
        );
        let mut scaled = self.d1.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= flux[i];
        }
        let mut kmat = self.d1.transpose() * scaled;
        for (j, g) in self.weights.iter().enumerate() {
            kmat[(j, j)] += c * g;
        }
        // Symmetrize away round-off.
        let t = kmat.transpose();
        (kmat + t) * 0.5
    }

    /// Sup of `|z|/U` over nodes and both endpoints (`r = 0`, `r = ∞`).
    pub fn d_norm(&self, values: &[f64]) -> f64 {
        let c = bubble_peak(self.dim);
        let inner = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ends = self.interpolate(values, 1.0).abs().max(self.interpolate(values, -1.0).abs());
        inner.max(ends) / c
    }

    /// `(∫ |∇z|²)^{1/2}` for a radial conformal profile.
    pub fn energy_norm(&self, values: &[f64]) -> f64 {
        self.energy_inner(values, values).max(0.0).sqrt()
    }

    /// Dirichlet inner product `∫ ∇z·∇y` of two radial conformal profiles.
    pub fn energy_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let da = self.differentiate(a);
        let db = self.differentiate(b);
        let n = self.dim as f64;
        let c = n * (n - 2.0) / 4.0;
        let mut s = 0.0;
        for j in 0..self.size() {
            let t = self.nodes[j];
            s += self.weights[j] * ((1.0 - t * t) * da[j] * db[j] + c * a[j] * b[j]);
        }
        2f64.powf(2.0 - n) * sphere_area(self.dim) * s
    }

    pub fn norms(&self, values: &[f64]) -> DiscreteNorms {
        DiscreteNorms { d_norm: self.d_norm(values), energy: self.energy_norm(values) }
    }
}

/// Gauss nodes and weights for `(1-t²)^λ`, symmetrized exactly.
fn gauss_gegenbauer(m: usize, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        let n = i as f64;
        let b = n * (n + 2.0 * lambda) / ((2.0 * n + 2.0 * lambda + 1.0) * (2.0 * n + 2.0 * lambda - 1.0));
        jac[(i, i - 1)] = b.sqrt();
        jac[(i - 1, i)] = b.sqrt();
    }
    let mut t: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    t.sort_by(|a, b| a.total_cmp(b));
    let p = JacobiParams { degree: m, a: lambda, b: lambda };
    for x in t.iter_mut() {
        for _ in 0..3 {
            let d = jacobi_deriv(p, *x);
            if d != 0.0 {
                *x -= jacobi_eval(p, *x) / d;
            }
        }
    }
    for j in 0..m / 2 {
        let s = 0.5 * (t[m - 1 - j] - t[j]);
        t[j] = -s;
        t[m - 1 - j] = s;
    }
    let mut w: Vec<f64> = t
        .iter()
        .map(|&x| {
            let d = jacobi_deriv(p, x);
            1.0 / ((1.0 - x * x) * d * d)
        })
        .collect();
    for j in 0..m / 2 {
        let avg = 0.5 * (w[j] + w[m - 1 - j]);
        w[j] = avg;
        w[m - 1 - j] = avg;
    }
    let total: f64 = w.iter().sum();
    let mass = gegenbauer_mass(lambda);
    for x in w.iter_mut() {
        *x *= mass / total;
    }
    (t, w)
}

/// D-norm and energy seminorm of a grid profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteNorms {
    pub d_norm: f64,
    pub energy: f64,
}

impl DiscreteNorms {
    pub fn x_norm(&self) -> f64 {
        self.d_norm.max(self.energy)
    }
}

/// `max(‖z‖_{1,2}, ‖z‖_D)` of a radial conformal profile.
pub fn x_norm(grid: &RadialGrid, values: &[f64]) -> f64 {
    grid.norms(values).x_norm()
}

/// One eigenpair of the linearized pencil.
#[derive(Debug, Clone)]
pub struct EigenPair {
    /// `β = 4μ/(N(N-2))`.
    pub beta: f64,
    /// Kelvin parity of the eigenvector (`±1`).
    pub parity: i32,
    /// Node values of `p`, normalized in the mass inner product.
    pub vector: Vec<f64>,
}

/// Discrete spectrum of the radial linearized operator at angular index `k`.
#[derive(Debug, Clone)]
pub struct LinearizedPencil {
    pub dim: usize,
    pub k: usize,
    /// Quadrature grid for this `k`; eigenvectors are values at its nodes.
    pub grid: RadialGrid,
    pub pairs: Vec<EigenPair>,
}

impl LinearizedPencil {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.beta).collect()
    }

    /// Eigenpair approximating `β_j` (`j ≥ k`).
    pub fn level(&self, j: usize) -> Option<&EigenPair> {
        self.pairs.get(j.checked_sub(self.k)?)
    }
}

/// Eigenpairs of one parity block of the grid's pencil, ascending.
pub fn parity_block(grid: &RadialGrid, parity: i32) -> Vec<EigenPair> {
    let h = grid.size() / 2;
    let kfull = grid.stiffness();
    let s = parity as f64;
    let scale: Vec<f64> = (0..h).map(|j| 1.0 / grid.weights[j].sqrt()).collect();
    let mut a = DMatrix::zeros(h, h);
    for i in 0..h {
        for j in 0..h {
            a[(i, j)] = (kfull[(i, j)] + s * kfull[(i, grid.mirror(j))]) * scale[i] * scale[j];
        }
    }
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let n = grid.dim as f64;
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let c = std::f64::consts::FRAC_1_SQRT_2;
    order
        .into_iter()
        .map(|col| {
            let mut v = vec![0.0; grid.size()];
            for j in 0..h {
                let x = eig.eigenvectors[(j, col)] * scale[j] * c;
                v[j] = x;
                v[grid.mirror(j)] = s * x;
            }
            EigenPair { beta: 4.0 * eig.eigenvalues[col] / (n * (n - 2.0)), parity, vector: v }
        })
        .collect()
}

/// Generalized symmetric-definite eigenproblem for angular index `k`, solved
/// blockwise on the two Kelvin-parity subspaces and merged in ascending order.
/// A grid with the matching quadrature is derived from `grid` when needed.
pub fn linearized_pencil(dim: usize, k: usize, grid: &RadialGrid) -> Result<LinearizedPencil> {
    if grid.dim != dim {
        return Err(Error::Domain(format!("grid built for N = {}, asked for N = {dim}", grid.dim)));
    }
    let grid = if grid.k == k { grid.clone() } else { RadialGrid::with_angular_index(grid.size(), dim, k)? };
    let mut pairs = parity_block(&grid, 1);
    pairs.extend(parity_block(&grid, -1));
    pairs.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    Ok(LinearizedPencil { dim, k, grid, pairs })
}

/// Cosine between two node profiles in the grid's mass inner product.
pub fn mass_cosine(grid: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    let g = &grid.weights;
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).zip(g).map(|((p, q), w)| p * q * w).sum::<f64>();
    dot(a, b) / (dot(a, a) * dot(b, b)).sqrt()
}

/// Node values of the Jacobi factor of `W_{n,k}`, `k` taken from the grid.
pub fn jacobi_profile(grid: &RadialGrid, n: usize) -> Vec<f64> {
    let a = grid.k as f64 + (grid.dim as f64 - 2.0) / 2.0;
    let p = JacobiParams { degree: n - grid.k, a, b: a };
    grid.nodes.iter().map(|&t| jacobi_eval(p, t)).collect()
}

/// Sample radii for the analytic residual: log-spaced in `(1e-3, 50]`.
pub fn residual_radii() -> Vec<f64> {
    let ratio = (RESIDUAL_R_MAX / RESIDUAL_R_MIN).ln();
    (1..=RESIDUAL_SAMPLES)
        .map(|i| RESIDUAL_R_MIN * (ratio * i as f64 / RESIDUAL_SAMPLES as f64).exp())
        .collect()
}

/// Relative sup of the radial residual
/// `-W'' - (N-1)/r W' + k(k+N-2)/r² W - β_n U^{4/(N-2)} W` for `W = W_{n,k}`,
/// divided pointwise by `U^{4/(N-2)} ‖W‖_sup`.
pub fn eigen_residual_analytic(dim: usize, n: usize, k: usize) -> Result<f64> {
    let e = RadialEigenfunction::new(dim, n, k)?;
    let nf = dim as f64;
    let kf = k as f64;
    let beta = beta_n(dim, n);
    let radii = residual_radii();
    let vals: Vec<(f64, f64, f64)> = radii.iter().map(|&r| e.eval_with_derivatives(r)).collect();
    let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.0.abs()));
    let mut worst = 0.0f64;
    for (&r, &(w, w1, w2)) in radii.iter().zip(&vals) {
        let weight = bubble_weight(dim, r);
        let res = -w2 - (nf - 1.0) / r * w1 + kf * (kf + nf - 2.0) / (r * r) * w - beta * weight * w;
        worst = worst.max(res.abs() / (weight * sup));
    }
    Ok(worst)
}

/// Summary of the discrete spectrum checks for one `(N, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCheck {
    pub dim: usize,
    pub k: usize,
    pub grid: usize,
    /// `(j, computed β, |computed - β_j|, parity ok)`.
    pub levels: Vec<(usize, f64, f64, bool)>,
}

impl SpectrumCheck {
    pub fn max_error(&self) -> f64 {
        self.levels.iter().fold(0.0, |m, l| m.max(l.2))
    }

    pub fn parity_ok(&self) -> bool {
        self.levels.iter().all(|l| l.3)
    }
}

/// Compares the lowest levels `j = k..=j_max` with `β_j` and the Kelvin parity `(-1)^{j-k}`.
pub fn check_spectrum(dim: usize, k: usize, grid: &RadialGrid, j_max: usize) -> Result<SpectrumCheck> {
    let pencil = linearized_pencil(dim, k, grid)?;
    let mut levels = Vec::new();
    for j in k..=j_max {
        let pair = pencil
            .level(j)
            .ok_or_else(|| Error::Resource(format!("grid too small for level {j}")))?;
        let expected_parity = if (j - k).is_multiple_of(2) { 1 } else { -1 };
        levels.push((j, pair.beta, (pair.beta - beta_n(dim, j)).abs(), pair.parity == expected_parity));
    }
    Ok(SpectrumCheck { dim, k, grid: grid.size(), levels })
}

/// Runs [`check_spectrum`] for every `k ≤ k_max` concurrently.
pub fn spectrum_sweep(
    dim: usize,
    grid: &RadialGrid,
    k_max: usize,
    j_max: usize,
    mode: Execution,
) -> Result<Vec<SpectrumCheck>> {
    let ks: Vec<usize> = (0..=k_max.min(j_max)).collect();
    exec::try_map(mode, &ks, |&k| check_spectrum(dim, k, grid, j_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{bubble_radial, w_mode_eval};

    #[test]
    fn grid_guards() {
        assert!(matches!(build_grid(8, 3), Err(Error::Resource(_))));
        assert!(matches!(build_grid(33, 3), Err(Error::Resource(_))));
        assert!(build_grid(16, 2).is_err());
    }

    #[test]
    fn masses_and_areas() {
        use std::f64::consts::PI;
        assert!((gegenbauer_mass(0.5) - PI / 2.0).abs() < 1e-15);
        assert!((gegenbauer_mass(1.0) - 4.0 / 3.0).abs() < 1e-15);
        assert!((gegenbauer_mass(1.5) - 3.0 * PI / 8.0).abs() < 1e-15);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn nodes_are_symmetric_roots() {
        let g = build_grid(64, 5).unwrap();
        for j in 0..64 {
            assert_eq!(g.nodes[j], -g.nodes[g.mirror(j)]);
            let p = JacobiParams { degree: 64, a: 1.5, b: 1.5 };
            assert!(jacobi_eval(p, g.nodes[j]).abs() < 1e-8 * jacobi_deriv(p, g.nodes[j]).abs());
        }
        // Exact for polynomials of degree 2M-1.
        let exact = gegenbauer_mass(1.5) - gegenbauer_mass(2.5);
        let q: f64 = g.nodes.iter().zip(&g.weights).map(|(t, w)| w * t * t).sum();
        assert!((q - exact).abs() < 1e-14);
    }

    #[test]
    fn differentiation_is_exact_on_polynomials() {
        let g = build_grid(64, 3).unwrap();
        let sq: Vec<f64> = g.nodes.iter().map(|t| t * t).collect();
        for (d, t) in g.differentiate(&sq).iter().zip(&g.nodes) {
            assert!((d - 2.0 * t).abs() < 1e-10);
        }
        let cube: Vec<f64> = g.nodes.iter().map(|t| t * t * t).collect();
        let dd = &g.d2 * DVector::from_vec(cube);
        for (d, t) in dd.iter().zip(&g.nodes) {
            assert!((d - 6.0 * t).abs() < 1e-7);
        }
    }

    #[test]
    fn projectors() {
        let g = build_grid(64, 4).unwrap();
        let even: Vec<f64> = g.nodes.iter().map(|t| 1.0 + t * t).collect();
        assert_eq!(g.project(&even, 1), even);
        let mixed: Vec<f64> = g.nodes.iter().map(|t| t.exp()).collect();
        let (pe, po) = (g.project(&mixed, 1), g.project(&mixed, -1));
        assert_eq!(g.project(&pe, 1), pe);
        assert!(g.project(&po, 1).iter().all(|x| x.abs() < 1e-16));
        for j in 0..64 {
            assert!((pe[j] + po[j] - mixed[j]).abs() < 1e-15);
        }
        let e = g.parity_basis(-1);
        let gram = e.transpose() * &e;
        assert!((gram - DMatrix::identity(32, 32)).norm() < 1e-14);
    }

    #[test]
    fn bubble_is_resolved() {
        for dim in 3..=6 {
            let g = build_grid(32, dim).unwrap();
            let v = g.sample(|r| bubble_radial(dim, r));
            let c = bubble_peak(dim);
            assert!(v.iter().all(|x| (x - c).abs() < 1e-12 * c));
            for &t in &[-1.0, -0.77, 0.0, 0.31, 1.0] {
                assert!((g.interpolate(&v, t) - c).abs() < 1e-12 * c);
            }
            assert!((g.d_norm(&v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_self_convergence() {
        let q = |m| {
            let g = build_grid(m, 3).unwrap();
            g.integrate_rn(|r| bubble_radial(3, r).powi(6))
        };
        let (a, b) = (q(128), q(256));
        assert!((a - b).abs() < 1e-8 * b.abs());
        // ∫|∇U|² = ∫U^{2*} for the bubble.
        let g = build_grid(64, 3).unwrap();
        let u = g.sample(|r| bubble_radial(3, r));
        assert!((g.energy_norm(&u).powi(2) - a).abs() < 1e-10 * a);
    }

    #[test]
    fn energy_norm_of_dilation_mode() {
        // ∫|∇W|² = ∫ (N+2)/(N-2) U^{4/(N-2)} W² for the dilation mode.
        for dim in 3..=5 {
            let g = build_grid(64, dim).unwrap();
            let v = g.sample(|r| w_mode_eval(dim, r));
            let lhs = g.energy_norm(&v).powi(2);
            let n = dim as f64;
            let rhs = g.integrate_rn(|r| (n + 2.0) / (n - 2.0) * bubble_weight(dim, r) * w_mode_eval(dim, r).powi(2));
            assert!((lhs - rhs).abs() < 1e-10 * rhs);
        }
    }

    #[test]
    fn x_norm_examples() {
        let g = build_grid(64, 3).unwrap();
        assert_eq!(x_norm(&g, &vec![0.0; 64]), 0.0);
        let w = |m| {
            let g = build_grid(m, 4).unwrap();
            let e = RadialEigenfunction::new(4, 2, 0).unwrap();
            x_norm(&g, &g.sample(|r| e.eval(r)))
        };
        assert!((w(128) - w(256)).abs() < 1e-6);
    }

    #[test]
    fn pencil_examples() {
        let g = build_grid(200, 3).unwrap();
        let p = linearized_pencil(3, 0, &g).unwrap();
        let ev = p.eigenvalues();
        for (x, y) in ev.iter().zip([1.0, 5.0, 35.0 / 3.0]) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
        let g4 = build_grid(200, 4).unwrap();
        let p = linearized_pencil(4, 1, &g4).unwrap();
        assert!((p.eigenvalues()[0] - 3.0).abs() < 1e-6);
        for n in 0..=6 {
            let pair = linearized_pencil(3, 0, &g).unwrap().level(n).unwrap().clone();
            let exact = jacobi_profile(&g, n);
            assert!(mass_cosine(&g, &pair.vector, &exact).abs() >= 1.0 - 1e-8);
        }
        assert!(linearized_pencil(4, 0, &g).is_err());
    }

    #[test]
    fn pencil_commutes_with_reflection() {
        for k in 0..3 {
            let g = RadialGrid::with_angular_index(32, 5, k).unwrap();
            let kmat = g.stiffness();
            for i in 0..32 {
                for j in 0..32 {
                    let a = kmat[(i, j)];
                    let b = kmat[(g.mirror(i), g.mirror(j))];
                    assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
                }
            }
        }
    }

    #[test]
    fn spectrum_parity_and_simplicity() {
        for dim in 3..=5 {
            let g = build_grid(64, dim).unwrap();
            for k in 0..=3 {
                let chk = check_spectrum(dim, k, &g, 6).unwrap();
                assert!(chk.parity_ok(), "N={dim} k={k} {:?}", chk.levels);
                assert!(chk.max_error() < 1e-8, "N={dim} k={k} {}", chk.max_error());
                let gk = RadialGrid::with_angular_index(64, dim, k).unwrap();
                for parity in [1, -1] {
                    let block = parity_block(&gk, parity);
                    for w in block.windows(2).take(4) {
                        assert!(w[1].beta - w[0].beta > 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn sweep_modes_agree() {
        let g = build_grid(48, 4).unwrap();
        let a = spectrum_sweep(4, &g, 3, 5, Execution::Sequential).unwrap();
        let b = spectrum_sweep(4, &g, 3, 5, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn residual_examples() {
        assert!(eigen_residual_analytic(3, 1, 0).unwrap() <= 1e-10);
        assert!(eigen_residual_analytic(4, 3, 2).unwrap() <= 1e-10);
        assert!(eigen_residual_analytic(3, 0, 0).unwrap() <= 1e-10);
        assert!(eigen_residual_analytic(3, 1, 2).is_err());
        let r = residual_radii();
        assert_eq!(r.len(), RESIDUAL_SAMPLES);
        assert!(r[0] > RESIDUAL_R_MIN && (r[r.len() - 1] - RESIDUAL_R_MAX).abs() < 1e-12);
    }

    #[test]
    fn residual_detects_wrong_eigenvalue() {
        // Sanity: the residual is not vacuous.
        let e = RadialEigenfunction::new(3, 2, 0).unwrap();
        let r = 0.7;
        let (w, w1, w2) = e.eval_with_derivatives(r);
        let wrong = -w2 - 2.0 / r * w1 - beta_n(3, 3) * bubble_weight(3, r) * w;
        assert!(wrong.abs() > 1e-3);
    }
}
