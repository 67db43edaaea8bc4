//! Nonlinearity families, the sum/difference change of variables and the
//! bifurcation parameters `β_n`, `α*_n`.

use std::fmt;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Critical exponent `2* = 2N/(N-2)`.
pub fn critical_exponent(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * n / (n - 2.0)
}

/// `(2n+N)(2n+N-2) / (N(N-2))`.
pub fn beta_n(dim: usize, n: usize) -> f64 {
    let (d, n) = (dim as f64, n as f64);
    (2.0 * n + d) * (2.0 * n + d - 2.0) / (d * (d - 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum FamilyKind {
    /// `F_1 = α u_1^{2*-1} + (1-α) u_1^p u_2^{2*-1-p}`
    Schrodinger { p: f64 },
    /// The Schrödinger family at `p = 2/(N-2)`.
    GrossPitaevskii,
    /// `F_1 = |α u_1² + (1-α) u_2²|^{2/(N-2)} u_1`
    DruetHebey,
}

impl FamilyKind {
    pub fn label(&self) -> String {
        match self {
            FamilyKind::Schrodinger { p } => format!("schrodinger(p={p})"),
            FamilyKind::GrossPitaevskii => "gp".into(),
            FamilyKind::DruetHebey => "dh".into(),
        }
    }
}

/// A concrete family in a fixed dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemFamily {
    pub kind: FamilyKind,
    pub dim: usize,
}

/// Interface the solvers need from a nonlinearity. `F_2` is always `F_1` with
/// the arguments swapped.
pub trait Nonlinearity: Send + Sync {
    fn dim(&self) -> usize;

    /// `F_1(α, u_1, u_2)`.
    fn f1(&self, alpha: f64, u1: f64, u2: f64) -> f64;

    /// `(∂_{u_1} F_1, ∂_{u_2} F_1)`.
    fn f1_partials(&self, alpha: f64, u1: f64, u2: f64) -> (f64, f64);

    /// `F_2(α, u_1, u_2) = F_1(α, u_2, u_1)`.
    fn f2(&self, alpha: f64, u1: f64, u2: f64) -> f64 {
        self.f1(alpha, u2, u1)
    }

    /// `∂_α F_1`.
    fn f1_dalpha(&self, alpha: f64, u1: f64, u2: f64) -> f64;

    /// `β(α) = ∂_{u_1}F_1(α,1,1) - ∂_{u_2}F_1(α,1,1)`.
    fn beta(&self, alpha: f64) -> f64 {
        let (a, b) = self.f1_partials(alpha, 1.0, 1.0);
        a - b
    }

    /// The `α` with `β(α) = β_n`, by monotone bisection.
    fn alpha_star(&self, n: usize) -> Result<f64> {
        bisect_beta(|a| self.beta(a), beta_n(self.dim(), n))
    }

    fn label(&self) -> String;
}

fn bisect_beta<B: Fn(f64) -> f64>(beta: B, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut grow = 0;
    while beta(lo) > target || beta(hi) < target {
        lo *= 2.0;
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::Domain(format!("β(α) never reaches {target}; is it increasing?")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if beta(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl SystemFamily {
    pub fn new(kind: FamilyKind, dim: usize) -> Result<Self> {
        if dim < 3 {
            return Err(Error::Domain(format!("dimension must be at least 3 (got {dim})")));
        }
        if let FamilyKind::Schrodinger { p } = kind {
            let q = critical_exponent(dim) - 1.0;
            if !(p >= 0.0 && p < q) {
                return Err(Error::Domain(format!(
                    "Schrödinger exponent p = {p} must lie in [0, {q})"
                )));
            }
        }
        let fam = Self { kind, dim };
        if kind == FamilyKind::GrossPitaevskii {
            let twin = fam.as_schrodinger();
            for &alpha in &[-1.0, 0.0, 0.5, 2.0] {
                let (a, b) = (fam.beta_of_alpha(alpha), twin.beta_of_alpha(alpha));
                debug_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
        Ok(fam)
    }

    pub fn schrodinger(p: f64, dim: usize) -> Result<Self> {
        Self::new(FamilyKind::Schrodinger { p }, dim)
    }

    pub fn gross_pitaevskii(dim: usize) -> Result<Self> {
        Self::new(FamilyKind::GrossPitaevskii, dim)
    }

    pub fn druet_hebey(dim: usize) -> Result<Self> {
        Self::new(FamilyKind::DruetHebey, dim)
    }

    /// Gross–Pitaevskii rewritten as its Schrödinger member; identity otherwise.
    pub fn as_schrodinger(&self) -> Self {
        match self.kind {
            FamilyKind::GrossPitaevskii => Self {
                kind: FamilyKind::Schrodinger { p: 2.0 / (self.dim as f64 - 2.0) },
                dim: self.dim,
            },
            _ => *self,
        }
    }

    /// `2* - 1`, the homogeneity degree.
    pub fn power(&self) -> f64 {
        critical_exponent(self.dim) - 1.0
    }

    /// Closed-form `β(α)`.
    pub fn beta_of_alpha(&self, alpha: f64) -> f64 {
        let n = self.dim as f64;
        let q = self.power();
        match self.kind {
            FamilyKind::Schrodinger { p } => 2.0 * (q - p) * alpha - (q - 2.0 * p),
            FamilyKind::GrossPitaevskii => critical_exponent(self.dim) * alpha - 1.0,
            FamilyKind::DruetHebey => 8.0 * alpha / (n - 2.0) - (6.0 - n) / (n - 2.0),
        }
    }

    /// Slope and intercept of the affine map `α ↦ β(α)`.
    pub fn beta_affine(&self) -> (f64, f64) {
        let b0 = self.beta_of_alpha(0.0);
        let slope = match self.kind {
            FamilyKind::Schrodinger { p } => 2.0 * (self.power() - p),
            FamilyKind::GrossPitaevskii => critical_exponent(self.dim),
            FamilyKind::DruetHebey => 8.0 / (self.dim as f64 - 2.0),
        };
        (slope, b0)
    }

    /// `α*_n` by inverting the affine `β`.
    pub fn alpha_star(&self, n: usize) -> f64 {
        let (slope, b0) = self.beta_affine();
        (beta_n(self.dim, n) - b0) / slope
    }

    /// `(F_1, F_2)` at a point of the open positive quadrant.
    pub fn f_eval(&self, alpha: f64, u1: f64, u2: f64) -> Result<(f64, f64)> {
        if !(u1 > 0.0 && u2 > 0.0) {
            return Err(Error::Domain(format!(
                "F is defined on (0,∞)², got (u1, u2) = ({u1}, {u2})"
            )));
        }
        Ok((self.f1(alpha, u1, u2), self.f2(alpha, u1, u2)))
    }

    pub fn spectral_point(&self, n: usize) -> SpectralPoint {
        SpectralPoint { n, beta_n: beta_n(self.dim, n), alpha_star: self.alpha_star(n) }
    }
}

impl fmt::Display for SystemFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (N={})", self.kind.label(), self.dim)
    }
}

impl Nonlinearity for SystemFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn f1(&self, alpha: f64, u1: f64, u2: f64) -> f64 {
        let q = self.power();
        match self.kind {
            FamilyKind::Schrodinger { p } => {
                alpha * u1.powf(q) + (1.0 - alpha) * u1.powf(p) * u2.powf(q - p)
            }
            FamilyKind::GrossPitaevskii => {
                let n = self.dim as f64;
                alpha * u1.powf(q)
                    + (1.0 - alpha) * u1.powf(2.0 / (n - 2.0)) * u2.powf(n / (n - 2.0))
            }
            FamilyKind::DruetHebey => {
                let s = 2.0 / (self.dim as f64 - 2.0);
                (alpha * u1 * u1 + (1.0 - alpha) * u2 * u2).abs().powf(s) * u1
            }
        }
    }

    fn f1_partials(&self, alpha: f64, u1: f64, u2: f64) -> (f64, f64) {
        let q = self.power();
        match self.as_schrodinger().kind {
            FamilyKind::Schrodinger { p } => {
                let cross = u1.powf(p) * u2.powf(q - p);
                let d1 = alpha * q * u1.powf(q - 1.0) + (1.0 - alpha) * p * cross / u1;
                let d2 = (1.0 - alpha) * (q - p) * cross / u2;
                (d1, d2)
            }
            FamilyKind::DruetHebey => {
                let s = 2.0 / (self.dim as f64 - 2.0);
                let inner = alpha * u1 * u1 + (1.0 - alpha) * u2 * u2;
                let mag = inner.abs().powf(s);
                let dmag = s * inner.abs().powf(s - 1.0) * inner.signum();
                (mag + dmag * 2.0 * alpha * u1 * u1, dmag * 2.0 * (1.0 - alpha) * u2 * u1)
            }
            FamilyKind::GrossPitaevskii => unreachable!(),
        }
    }

    fn f1_dalpha(&self, alpha: f64, u1: f64, u2: f64) -> f64 {
        let q = self.power();
        match self.as_schrodinger().kind {
            FamilyKind::Schrodinger { p } => u1.powf(q) - u1.powf(p) * u2.powf(q - p),
            FamilyKind::DruetHebey => {
                let s = 2.0 / (self.dim as f64 - 2.0);
                let inner = alpha * u1 * u1 + (1.0 - alpha) * u2 * u2;
                s * inner.abs().powf(s - 1.0) * inner.signum() * (u1 * u1 - u2 * u2) * u1
            }
            FamilyKind::GrossPitaevskii => unreachable!(),
        }
    }

    fn beta(&self, alpha: f64) -> f64 {
        self.beta_of_alpha(alpha)
    }

    fn alpha_star(&self, n: usize) -> Result<f64> {
        Ok(SystemFamily::alpha_star(self, n))
    }

    fn label(&self) -> String {
        self.kind.label()
    }
}

type ScalarField = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// User-supplied `F_1(α, u_1, u_2)`. Partial derivatives are central
/// differences; `β` and `α*_n` follow from them.
#[derive(Clone)]
pub struct CustomFamily {
    pub dim: usize,
    pub name: String,
    f1: ScalarField,
    step: f64,
}

impl CustomFamily {
    pub fn new<F>(dim: usize, name: impl Into<String>, f1: F) -> Result<Self>
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        if dim < 3 {
            return Err(Error::Domain(format!("dimension must be at least 3 (got {dim})")));
        }
        Ok(Self { dim, name: name.into(), f1: Arc::new(f1), step: 1e-6 })
    }
}

impl fmt::Debug for CustomFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFamily").field("dim", &self.dim).field("name", &self.name).finish()
    }
}

impl Nonlinearity for CustomFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn f1(&self, alpha: f64, u1: f64, u2: f64) -> f64 {
        (self.f1)(alpha, u1, u2)
    }

    fn f1_partials(&self, alpha: f64, u1: f64, u2: f64) -> (f64, f64) {
        let (h1, h2) = (self.step * u1.max(1.0), self.step * u2.max(1.0));
        let f = &self.f1;
        (
            (f(alpha, u1 + h1, u2) - f(alpha, u1 - h1, u2)) / (2.0 * h1),
            (f(alpha, u1, u2 + h2) - f(alpha, u1, u2 - h2)) / (2.0 * h2),
        )
    }

    fn f1_dalpha(&self, alpha: f64, u1: f64, u2: f64) -> f64 {
        let h = self.step * alpha.abs().max(1.0);
        ((self.f1)(alpha + h, u1, u2) - (self.f1)(alpha - h, u1, u2)) / (2.0 * h)
    }

    fn label(&self) -> String {
        self.name.clone()
    }
}

/// `β_n` together with `α*_n` for one family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub n: usize,
    pub beta_n: f64,
    pub alpha_star: f64,
}

pub fn f_eval(fam: &SystemFamily, alpha: f64, u1: f64, u2: f64) -> Result<(f64, f64)> {
    fam.f_eval(alpha, u1, u2)
}

pub fn beta_of_alpha(fam: &SystemFamily, alpha: f64) -> f64 {
    fam.beta_of_alpha(alpha)
}

pub fn alpha_star(fam: &SystemFamily, n: usize) -> f64 {
    fam.alpha_star(n)
}

/// `u_1 = U + (z_1+z_2)/2`, `u_2 = U + (z_1-z_2)/2`; fails outside the open cone.
pub fn unfold(u: f64, z1: f64, z2: f64) -> Result<(f64, f64)> {
    let u1 = u + 0.5 * (z1 + z2);
    let u2 = u + 0.5 * (z1 - z2);
    if !(u1 > 0.0 && u2 > 0.0) {
        return Err(Error::ConeExit { margin: u1.min(u2) / u });
    }
    Ok((u1, u2))
}

/// `(f_1, f_2) = (F_1 + F_2 - 2U^{2*-1}, F_1 - F_2)` at `u = U + (z_1 ± z_2)/2`.
pub fn fz_eval<F: Nonlinearity + ?Sized>(
    fam: &F,
    alpha: f64,
    u: f64,
    z1: f64,
    z2: f64,
) -> Result<(f64, f64)> {
    let (u1, u2) = unfold(u, z1, z2)?;
    let q = critical_exponent(fam.dim()) - 1.0;
    let a = fam.f1(alpha, u1, u2);
    let b = fam.f1(alpha, u2, u1);
    Ok((a + b - 2.0 * u.powf(q), a - b))
}

/// Values and first derivatives of `(f_1, f_2)` in `z_1`, `z_2` and `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FzJet {
    pub f1: f64,
    pub f2: f64,
    pub f1_z1: f64,
    pub f1_z2: f64,
    pub f2_z1: f64,
    pub f2_z2: f64,
    pub f1_alpha: f64,
    pub f2_alpha: f64,
}

pub fn fz_jet<F: Nonlinearity + ?Sized>(
    fam: &F,
    alpha: f64,
    u: f64,
    z1: f64,
    z2: f64,
) -> Result<FzJet> {
    let (u1, u2) = unfold(u, z1, z2)?;
    let q = critical_exponent(fam.dim()) - 1.0;
    let a = fam.f1(alpha, u1, u2);
    let b = fam.f1(alpha, u2, u1);
    // ∂F_1 at (u1,u2) and at the swapped point, which gives ∂F_2.
    let (a1, a2) = fam.f1_partials(alpha, u1, u2);
    let (s1, s2) = fam.f1_partials(alpha, u2, u1);
    let (b1, b2) = (s2, s1);
    let (aa, ba) = (fam.f1_dalpha(alpha, u1, u2), fam.f1_dalpha(alpha, u2, u1));
    Ok(FzJet {
        f1: a + b - 2.0 * u.powf(q),
        f2: a - b,
        f1_z1: 0.5 * (a1 + a2 + b1 + b2),
        f1_z2: 0.5 * (a1 - a2 + b1 - b2),
        f2_z1: 0.5 * (a1 + a2 - b1 - b2),
        f2_z2: 0.5 * (a1 - a2 - b1 + b2),
        f1_alpha: aa + ba,
        f2_alpha: aa - ba,
    })
}

/// Outcome of one assumption check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub family: String,
    pub dim: usize,
    pub alpha: f64,
    pub samples: usize,
    pub cooperative: bool,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const ASSUMPTION_TOL: f64 = 1e-10;

/// Samples `(u_1, u_2) ∈ (0,10]²`, `λ ∈ (0,10]` and checks the structural
/// assumptions on `F`. Deterministic for a given `seed`.
pub fn check_assumptions<F: Nonlinearity + ?Sized>(
    fam: &F,
    alpha: f64,
    sample_count: usize,
    seed: u64,
) -> Result<AssumptionReport> {
    if sample_count == 0 {
        return Err(Error::Domain("sample_count must be at least 1".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let q = critical_exponent(fam.dim()) - 1.0;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);

    let mut smooth = 0.0f64;
    let mut growth = 0.0f64;
    let mut homog = 0.0f64;
    let mut symm = 0.0f64;
    let mut finite = true;
    for i in 0..sample_count {
        let u1 = 10.0 * (1.0 - rng.random::<f64>());
        let u2 = 10.0 * (1.0 - rng.random::<f64>());
        let lambda = if i == 0 { 1.0 } else { 10.0 * (1.0 - rng.random::<f64>()) };

        let (d1, d2) = fam.f1_partials(alpha, u1, u2);
        let da = fam.f1_dalpha(alpha, u1, u2);
        finite &= d1.is_finite() && d2.is_finite() && da.is_finite();
        let h = 1e-6;
        let fd = (fam.f1(alpha, u1 + h * u1, u2) - fam.f1(alpha, u1 - h * u1, u2)) / (2.0 * h * u1);
        smooth = smooth.max(rel(d1, fd));
        growth = growth.max((d1.abs() + d2.abs()) / (u1.powf(q - 1.0) + u2.powf(q - 1.0)));

        let scaled = fam.f1(alpha, lambda * u1, lambda * u2);
        homog = homog.max(rel(scaled, lambda.powf(q) * fam.f1(alpha, u1, u2)));
        symm = symm.max(rel(fam.f1(alpha, u1, u2), fam.f2(alpha, u2, u1)));
        let scaled = fam.f2(alpha, lambda * u1, lambda * u2);
        homog = homog.max(rel(scaled, lambda.powf(q) * fam.f2(alpha, u1, u2)));
    }

    let unit = (fam.f1(alpha, 1.0, 1.0) - 1.0).abs().max((fam.f2(alpha, 1.0, 1.0) - 1.0).abs());

    let slope = |a: f64| {
        let h = 1e-4;
        (fam.beta(a + h) - fam.beta(a - h)) / (2.0 * h)
    };
    let (s0, s1) = (slope(alpha), slope(alpha + 1.0));

    let checks = vec![
        AssumptionCheck { name: "F1".into(), passed: finite && smooth < 1e-5, max_error: smooth },
        AssumptionCheck { name: "F2".into(), passed: growth.is_finite(), max_error: growth },
        AssumptionCheck { name: "F3".into(), passed: unit <= ASSUMPTION_TOL, max_error: unit },
        AssumptionCheck { name: "F4".into(), passed: homog <= ASSUMPTION_TOL, max_error: homog },
        AssumptionCheck { name: "F5".into(), passed: symm <= ASSUMPTION_TOL, max_error: symm },
        AssumptionCheck {
            name: "F6".into(),
            passed: s0 > 0.0 && s1 > 0.0,
            max_error: -s0.min(s1),
        },
    ];
    Ok(AssumptionReport {
        family: fam.label(),
        dim: fam.dim(),
        alpha,
        samples: sample_count,
        cooperative: 1.0 - alpha > 0.0,
        checks,
    })
}
