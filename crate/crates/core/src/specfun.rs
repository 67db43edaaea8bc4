//! Special functions the radial and nonradial kernels are built from.
//!
//! Everything here is a pure function of its arguments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Degree and exponents of a Jacobi polynomial `P_m^{(a,b)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiParams {
    pub degree: usize,
    pub a: f64,
    pub b: f64,
}

impl JacobiParams {
    pub fn new(degree: usize, a: f64, b: f64) -> Result<Self> {
        if !(a > -1.0) || !(b > -1.0) {
            return Err(Error::Domain(format!(
                "Jacobi exponents must exceed -1 (got a = {a}, b = {b})"
            )));
        }
        Ok(Self { degree, a, b })
    }

    /// Symmetric (Gegenbauer-type) parameters `a = b`.
    pub fn symmetric(degree: usize, a: f64) -> Result<Self> {
        Self::new(degree, a, a)
    }
}

/// `P_m^{(a,b)}(ξ)` by the three-term recurrence in `m`.
pub fn jacobi_eval(params: JacobiParams, xi: f64) -> f64 {
    jacobi_recurrence(params.degree, params.a, params.b, xi)
}

fn jacobi_recurrence(m: usize, a: f64, b: f64, x: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let ab = a + b;
    let mut p_prev = 1.0;
    let mut p = (a + 1.0) + 0.5 * (ab + 2.0) * (x - 1.0);
    for n in 2..=m {
        let n = n as f64;
        let c = 2.0 * n + ab;
        let a1 = 2.0 * n * (n + ab) * (c - 2.0);
        let a2 = (c - 1.0) * (c * (c - 2.0) * x + a * a - b * b);
        let a3 = 2.0 * (n + a - 1.0) * (n + b - 1.0) * c;
        let next = (a2 * p - a3 * p_prev) / a1;
        p_prev = p;
        p = next;
    }
    p
}

/// `d/dξ P_m^{(a,b)}(ξ) = (m+a+b+1)/2 · P_{m-1}^{(a+1,b+1)}(ξ)`.
pub fn jacobi_deriv(params: JacobiParams, xi: f64) -> f64 {
    jacobi_deriv_order(params, 1, xi)
}

/// Derivative of order `order`, by repeated use of the shift identity.
pub fn jacobi_deriv_order(params: JacobiParams, order: usize, xi: f64) -> f64 {
    let JacobiParams { degree: m, a, b } = params;
    if order > m {
        return 0.0;
    }
    let mut factor = 1.0;
    for i in 0..order {
        factor *= 0.5 * (m as f64 + a + b + 1.0 + i as f64);
    }
    factor * jacobi_recurrence(m - order, a + order as f64, b + order as f64, xi)
}

/// Generalized binomial coefficient `binom(x, s)` for real `x`.
pub fn binom_real(x: f64, s: usize) -> f64 {
    (0..s).fold(1.0, |acc, i| acc * (x - i as f64) / (i as f64 + 1.0))
}

/// Reference evaluation from the explicit binomial sum
/// `Σ_s binom(m+a, s) binom(m+b, m-s) ((ξ-1)/2)^{m-s} ((ξ+1)/2)^s`.
///
/// Slower and less stable than [`jacobi_eval`]; kept as an independent check.
pub fn jacobi_binomial_sum(params: JacobiParams, xi: f64) -> f64 {
    let m = params.degree;
    let lo = 0.5 * (xi - 1.0);
    let hi = 0.5 * (xi + 1.0);
    (0..=m)
        .map(|s| {
            binom_real(m as f64 + params.a, s)
                * binom_real(m as f64 + params.b, m - s)
                * lo.powi((m - s) as i32)
                * hi.powi(s as i32)
        })
        .sum()
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 3 {
        return Err(Error::Domain(format!("dimension must be at least 3 (got {dim})")));
    }
    Ok(())
}

/// The bubble `U_{δ,y}(x) = [N(N-2)δ²]^{(N-2)/4} / (δ² + |x-y|²)^{(N-2)/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub dim: usize,
    pub scale: f64,
    pub center: Vec<f64>,
}

impl Bubble {
    pub fn new(dim: usize, scale: f64, center: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if !(scale > 0.0) {
            return Err(Error::Domain(format!("bubble scale must be positive (got {scale})")));
        }
        if center.len() != dim {
            return Err(Error::Domain(format!(
                "center has {} coordinates, expected {dim}",
                center.len()
            )));
        }
        Ok(Self { dim, scale, center })
    }

    /// The standard bubble `U = U_{1,0}`.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(dim, 1.0, vec![0.0; dim])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        let n = self.dim as f64;
        let s2 = self.scale * self.scale;
        (n * (n - 2.0) * s2).powf((n - 2.0) / 4.0) / (s2 + d2).powf((n - 2.0) / 2.0)
    }
}

/// `[N(N-2)]^{(N-2)/4}`, the value of `U` at the origin.
pub fn bubble_peak(dim: usize) -> f64 {
    let n = dim as f64;
    (n * (n - 2.0)).powf((n - 2.0) / 4.0)
}

/// `U(r)` for the standard bubble.
pub fn bubble_radial(dim: usize, r: f64) -> f64 {
    let n = dim as f64;
    bubble_peak(dim) / (1.0 + r * r).powf((n - 2.0) / 2.0)
}

/// `U^{4/(N-2)}(r) = N(N-2)/(1+r²)²`, the weight of the linearized problem.
pub fn bubble_weight(dim: usize, r: f64) -> f64 {
    let n = dim as f64;
    let q = 1.0 + r * r;
    n * (n - 2.0) / (q * q)
}

/// Dilation mode `W(r) = (1 - r²)/(1 + r²)^{N/2}`.
pub fn w_mode_eval(dim: usize, r: f64) -> f64 {
    (1.0 - r * r) / (1.0 + r * r).powf(dim as f64 / 2.0)
}

/// Radial factor `W_{n,k}` of the kernel at `β_n` with angular index `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadialEigenfunction {
    pub dim: usize,
    pub n: usize,
    pub k: usize,
}

impl RadialEigenfunction {
    pub fn new(dim: usize, n: usize, k: usize) -> Result<Self> {
        check_dim(dim)?;
        if k > n {
            return Err(Error::Domain(format!("angular index k = {k} exceeds n = {n}")));
        }
        Ok(Self { dim, n, k })
    }

    /// Exponent `k + (N-2)/2` shared by the Jacobi factor and the decay.
    pub fn exponent(&self) -> f64 {
        self.k as f64 + (self.dim as f64 - 2.0) / 2.0
    }

    fn jacobi(&self) -> JacobiParams {
        let e = self.exponent();
        JacobiParams { degree: self.n - self.k, a: e, b: e }
    }

    /// `r^k (1+r²)^{-k-(N-2)/2} P_{n-k}^{(e,e)}((1-r²)/(1+r²))`.
    pub fn eval(&self, r: f64) -> f64 {
        let q = 1.0 + r * r;
        let t = (1.0 - r * r) / q;
        r.powi(self.k as i32) * q.powf(-self.exponent()) * jacobi_eval(self.jacobi(), t)
    }

    /// Value and first two radial derivatives, all from closed-form chains.
    pub fn eval_with_derivatives(&self, r: f64) -> (f64, f64, f64) {
        let k = self.k as f64;
        let e = self.exponent();
        let q = 1.0 + r * r;
        let t = (1.0 - r * r) / q;

        // W = A·B·C with A = r^k, B = q^{-e}, C = P(t(r)).
        let (a0, a1, a2) = if self.k == 0 {
            (1.0, 0.0, 0.0)
        } else {
            let rk2 = r.powi(self.k as i32 - 2);
            (rk2 * r * r, k * rk2 * r, k * (k - 1.0) * rk2)
        };
        let b0 = q.powf(-e);
        let b1 = -2.0 * e * r * b0 / q;
        let b2 = -2.0 * e * b0 / q + 4.0 * e * (e + 1.0) * r * r * b0 / (q * q);
        let t1 = -4.0 * r / (q * q);
        let t2 = (12.0 * r * r - 4.0) / (q * q * q);
        let jp = self.jacobi();
        let p0 = jacobi_eval(jp, t);
        let p1 = jacobi_deriv_order(jp, 1, t);
        let p2 = jacobi_deriv_order(jp, 2, t);
        let c0 = p0;
        let c1 = p1 * t1;
        let c2 = p2 * t1 * t1 + p1 * t2;

        let w0 = a0 * b0 * c0;
        let w1 = a1 * b0 * c0 + a0 * b1 * c0 + a0 * b0 * c1;
        let w2 = a2 * b0 * c0
            + a0 * b2 * c0
            + a0 * b0 * c2
            + 2.0 * (a1 * b1 * c0 + a1 * b0 * c1 + a0 * b1 * c1);
        (w0, w1, w2)
    }

    /// Sign picked up under the Kelvin transform, `(-1)^{n-k}`.
    pub fn kelvin_sign(&self) -> i32 {
        kelvin_sign(self.n, self.k)
    }
}

/// Convenience wrapper around [`RadialEigenfunction::eval`].
pub fn radial_eigenfunction_eval(e: RadialEigenfunction, r: f64) -> f64 {
    e.eval(r)
}

/// The `O(N-1)`-invariant harmonic `P_k^{((N-3)/2,(N-3)/2)}(cos θ)`, θ measured from `x_N`.
pub fn axial_harmonic_eval(dim: usize, k: usize, theta: f64) -> f64 {
    let a = (dim as f64 - 3.0) / 2.0;
    jacobi_eval(JacobiParams { degree: k, a, b: a }, theta.cos())
}

/// A point of `R^N`, either Cartesian or in the spherical coordinates
/// `(r, φ, θ_1, …, θ_{N-2})` with `x_N = r cos θ_{N-2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Cartesian(Vec<f64>),
    Spherical { r: f64, phi: f64, thetas: Vec<f64> },
}

impl Point {
    pub fn dim(&self) -> usize {
        match self {
            Point::Cartesian(x) => x.len(),
            Point::Spherical { thetas, .. } => thetas.len() + 2,
        }
    }

    pub fn to_cartesian(&self) -> Vec<f64> {
        match self {
            Point::Cartesian(x) => x.clone(),
            Point::Spherical { r, phi, thetas } => spherical_to_cartesian(*r, *phi, thetas),
        }
    }
}

/// `x_1 = r cos φ Π sin θ_i`, `x_2 = r sin φ Π sin θ_i`,
/// `x_j = r cos θ_{j-2} Π_{i > j-2} sin θ_i` for `j ≥ 3`.
pub fn spherical_to_cartesian(r: f64, phi: f64, thetas: &[f64]) -> Vec<f64> {
    let m = thetas.len();
    let mut x = vec![0.0; m + 2];
    // tail[i] = Π_{l >= i} sin θ_l (0-based)
    let mut tail = vec![1.0; m + 1];
    for i in (0..m).rev() {
        tail[i] = tail[i + 1] * thetas[i].sin();
    }
    x[0] = r * phi.cos() * tail[0];
    x[1] = r * phi.sin() * tail[0];
    for (i, th) in thetas.iter().enumerate() {
        x[i + 2] = r * th.cos() * tail[i + 1];
    }
    x
}

/// Angular content of a nonradial kernel tangent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TangentKind {
    /// `Σ_{h odd} a_h W_{n,h}(r) P_h^{((N-3)/2,(N-3)/2)}(cos θ_{N-2})`, pairs `(h, a_h)`.
    Axial { coefficients: Vec<(usize, f64)> },
    /// `a (1+r²)^{-n-(N-2)/2} Im(x_1 + i x_2)^n`.
    Periodic { coefficient: f64 },
}

/// Tangent direction `Z_n` of a nonradial branch at `α*_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTangent {
    pub dim: usize,
    pub order: usize,
    pub kind: TangentKind,
}

impl KernelTangent {
    pub fn axial(dim: usize, order: usize, coefficients: Vec<(usize, f64)>) -> Result<Self> {
        check_dim(dim)?;
        if coefficients.is_empty() {
            return Err(Error::Domain("axial tangent needs at least one coefficient".into()));
        }
        if let Some(&(h, _)) = coefficients.iter().find(|(h, _)| h % 2 == 0 || *h > order) {
            return Err(Error::Domain(format!(
                "axial tangent index h = {h} must be odd and at most n = {order}"
            )));
        }
        Ok(Self { dim, order, kind: TangentKind::Axial { coefficients } })
    }

    pub fn periodic(dim: usize, order: usize, coefficient: f64) -> Result<Self> {
        check_dim(dim)?;
        if order == 0 {
            return Err(Error::Domain("periodic tangent needs order n >= 1".into()));
        }
        Ok(Self { dim, order, kind: TangentKind::Periodic { coefficient } })
    }

    pub fn eval(&self, point: &Point) -> Result<f64> {
        if point.dim() != self.dim {
            return Err(Error::Domain(format!(
                "point has dimension {}, tangent lives in R^{}",
                point.dim(),
                self.dim
            )));
        }
        let x = point.to_cartesian();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        match &self.kind {
            TangentKind::Axial { coefficients } => {
                let cos_theta = if r > 0.0 { x[self.dim - 1] / r } else { 1.0 };
                let a = (self.dim as f64 - 3.0) / 2.0;
                Ok(coefficients
                    .iter()
                    .map(|&(h, c)| {
                        let radial = RadialEigenfunction { dim: self.dim, n: self.order, k: h };
                        c * radial.eval(r)
                            * jacobi_eval(JacobiParams { degree: h, a, b: a }, cos_theta)
                    })
                    .sum())
            }
            TangentKind::Periodic { coefficient } => {
                let n = self.order;
                let decay = (1.0 + r2).powf(-(n as f64) - (self.dim as f64 - 2.0) / 2.0);
                Ok(coefficient * decay * im_power(x[0], x[1], n))
            }
        }
    }
}

/// `Im (x + i y)^n` by repeated complex multiplication.
pub fn im_power(x: f64, y: f64, n: usize) -> f64 {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..n {
        let nr = re * x - im * y;
        im = re * y + im * x;
        re = nr;
    }
    im
}

/// Convenience wrapper around [`KernelTangent::eval`].
pub fn kernel_tangent_eval(t: &KernelTangent, point: &Point) -> Result<f64> {
    t.eval(point)
}

/// Kelvin transform of a radial profile, `r^{-(N-2)} f(1/r)`.
pub fn kelvin_apply<F: Fn(f64) -> f64>(dim: usize, f: F, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("Kelvin transform needs r > 0 (got {r})")));
    }
    Ok(r.powf(-(dim as f64 - 2.0)) * f(1.0 / r))
}

/// `(-1)^{n-k}`: parity of `W_{n,k}` under the Kelvin transform.
pub fn kelvin_sign(n: usize, k: usize) -> i32 {
    if (n + k).is_multiple_of(2) {
        1
    } else {
        -1
    }
}
