//! Combinatorics of the symmetry-restricted kernels: invariant harmonic
//! dimensions, `γ(n)`, bifurcation verdicts, Morse indices and solution counts.

pub mod oracle;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::systems::{beta_n, SystemFamily};

pub use oracle::{harmonic_dim_by_counting, harmonic_dim_oracle, ORACLE_MAX_DEGREE};

/// Symmetry class of the second component.
///
/// * `Radial`: `O(N)`-invariant.
/// * `SectorOdd(m)`: invariant under `O(N-m)` acting on the first `N-m`
///   coordinates, odd in each of the last `m`.
/// * `Periodic(m)`: `2π/m`-periodic and odd in the angle of the `(x_1,x_2)` plane,
///   invariant in the remaining variables up to the natural action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "class", content = "m", rename_all = "snake_case")]
pub enum SymmetryClass {
    Radial,
    SectorOdd(usize),
    Periodic(usize),
}

impl SymmetryClass {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if dim < 3 {
            return Err(Error::Domain(format!("dimension must be at least 3 (got {dim})")));
        }
        match *self {
            SymmetryClass::SectorOdd(m) if m == 0 || m > dim => Err(Error::Domain(format!(
                "sector-odd class needs 1 <= m <= N (got m = {m}, N = {dim})"
            ))),
            SymmetryClass::Periodic(m) if m < 2 => {
                Err(Error::Domain(format!("periodic class needs m >= 2 (got {m})")))
            }
            _ => Ok(()),
        }
    }

    /// Parity of the angular indices the class admits.
    pub fn base_index(&self) -> usize {
        match *self {
            SymmetryClass::Radial => 0,
            SymmetryClass::SectorOdd(m) | SymmetryClass::Periodic(m) => m,
        }
    }

    /// Kelvin sign imposed on the second component when working at level `n`:
    /// `(-1)^{n-k₀}`.
    pub fn kelvin_sign(&self, n: usize) -> i32 {
        if (n + self.base_index()).is_multiple_of(2) {
            1
        } else {
            -1
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymmetryClass::Radial => write!(f, "radial"),
            SymmetryClass::SectorOdd(m) => write!(f, "sector-odd({m})"),
            SymmetryClass::Periodic(m) => write!(f, "periodic({m})"),
        }
    }
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Dimension of degree-`k` spherical harmonics in the class.
pub fn harmonic_dim(dim: usize, k: usize, class: SymmetryClass) -> Result<u64> {
    class.validate(dim)?;
    Ok(match class {
        SymmetryClass::Radial => u64::from(k == 0),
        SymmetryClass::SectorOdd(m) => {
            if k < m || !(k - m).is_multiple_of(2) {
                0
            } else {
                binomial(((k - m) / 2 + m - 1) as u64, (m - 1) as u64) as u64
            }
        }
        SymmetryClass::Periodic(m) => {
            if k > m {
                return Err(Error::Unsupported(format!(
                    "periodic({m}) harmonics are only classified for k <= m (got k = {k})"
                )));
            }
            u64::from(k == m)
        }
    })
}

/// Dimension `γ(n)` of the class-restricted kernel at `β_n`.
pub fn gamma(dim: usize, n: usize, class: SymmetryClass) -> Result<u64> {
    class.validate(dim)?;
    Ok(match class {
        SymmetryClass::Radial => 1,
        SymmetryClass::SectorOdd(m) => {
            if n < m {
                0
            } else {
                binomial((m + (n - m) / 2) as u64, m as u64) as u64
            }
        }
        SymmetryClass::Periodic(m) => {
            if n != m {
                return Err(Error::Unsupported(format!(
                    "periodic({m}) kernel is only classified at n = m (got n = {n})"
                )));
            }
            1
        }
    })
}

/// `γ(n)` as the explicit sum of harmonic dimensions over contributing `k`.
pub fn gamma_by_summation(dim: usize, n: usize, class: SymmetryClass) -> Result<u64> {
    let k0 = class.base_index();
    let mut total = 0;
    let mut k = k0 % 2;
    while k <= n {
        total += harmonic_dim(dim, k, class)?;
        k += 2;
    }
    if let SymmetryClass::Periodic(m) = class {
        if n != m {
            return Err(Error::Unsupported(format!(
                "periodic({m}) kernel is only classified at n = m (got n = {n})"
            )));
        }
    }
    Ok(total)
}

/// Whether the class yields a bifurcation at `α*_n`.
pub fn is_bifurcation(dim: usize, n: usize, class: SymmetryClass) -> Result<bool> {
    let g = gamma(dim, n, class)?;
    Ok(match class {
        SymmetryClass::Radial => true,
        SymmetryClass::SectorOdd(_) => g % 2 == 1,
        SymmetryClass::Periodic(m) => n == m && m >= 2,
    })
}

/// Tolerance for declaring `β(α)` equal to some `β_j`.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Morse index of the trivial solution at `α`, restricted to the class, with
/// the Kelvin sign of the second component fixed by `n_context`.
pub fn morse_index(
    fam: &SystemFamily,
    alpha: f64,
    class: SymmetryClass,
    n_context: usize,
) -> Result<usize> {
    class.validate(fam.dim)?;
    if let SymmetryClass::Periodic(_) = class {
        return Err(Error::Unsupported("Morse index is not tracked for periodic classes".into()));
    }
    let dim = fam.dim;
    let beta = fam.beta_of_alpha(alpha);
    let sign = class.kelvin_sign(n_context);
    // The first equation only sees j = 0.
    let mut index = first_equation_morse(dim);
    let mut j = 0;
    loop {
        let bj = beta_n(dim, j);
        if (beta - bj).abs() <= DEGENERACY_TOL * bj.max(1.0) {
            return Err(Error::Degenerate { beta, index: j });
        }
        if bj >= beta {
            break;
        }
        index += multiplicity(dim, j, class, sign)?;
        j += 1;
    }
    Ok(index)
}

/// Eigenvalues `β_j (N-2)/(N+2) < 1` of the first linearized equation.
pub fn first_equation_morse(dim: usize) -> usize {
    let ratio = (dim as f64 - 2.0) / (dim as f64 + 2.0);
    (0..).take_while(|&j| beta_n(dim, j) * ratio < 1.0).count()
}

fn multiplicity(dim: usize, j: usize, class: SymmetryClass, sign: i32) -> Result<usize> {
    let mut total = 0;
    for k in 0..=j {
        let kelvin = if (j + k).is_multiple_of(2) { 1 } else { -1 };
        if kelvin == sign {
            total += harmonic_dim(dim, k, class)? as usize;
        }
    }
    Ok(total)
}

/// Leray–Schauder degree `(-1)^{m(α)}`.
pub fn degree(fam: &SystemFamily, alpha: f64, class: SymmetryClass, n_context: usize) -> Result<i32> {
    let m = morse_index(fam, alpha, class, n_context)?;
    Ok(if m % 2 == 0 { 1 } else { -1 })
}

/// One line of a solution count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub class: SymmetryClass,
    pub gamma: u64,
    pub mechanism: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionCount {
    pub dim: usize,
    pub n: usize,
    pub total: u64,
    pub breakdown: Vec<Contribution>,
}

/// Number of distinct solution families bifurcating from `(U,U)` at `α*_n`.
pub fn solution_count(dim: usize, n: usize) -> Result<SolutionCount> {
    if dim < 3 {
        return Err(Error::Domain(format!("dimension must be at least 3 (got {dim})")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("solution counts start at n = 2 (got {n})")));
    }
    let mut breakdown = vec![Contribution {
        class: SymmetryClass::Radial,
        gamma: 1,
        mechanism: "radial, one-dimensional kernel".into(),
    }];
    for m in 1..=n.min(dim) {
        let class = SymmetryClass::SectorOdd(m);
        if is_bifurcation(dim, n, class)? {
            breakdown.push(Contribution {
                class,
                gamma: gamma(dim, n, class)?,
                mechanism: "odd kernel dimension, degree jump".into(),
            });
        }
    }
    breakdown.push(Contribution {
        class: SymmetryClass::Periodic(n),
        gamma: 1,
        mechanism: "periodic, one-dimensional kernel".into(),
    });
    Ok(SolutionCount { dim, n, total: breakdown.len() as u64, breakdown })
}

/// Expected counts for `n = 2..=7` (rows) and `N = 3, 4, 5` (columns).
pub const GOLDEN_DIMS: [usize; 3] = [3, 4, 5];
pub const GOLDEN_NS: [usize; 6] = [2, 3, 4, 5, 6, 7];
pub const GOLDEN_COUNTS: [[u64; 3]; 6] =
    [[4, 4, 4], [4, 4, 4], [4, 5, 5], [4, 5, 6], [3, 4, 5], [2, 3, 3]];

/// Solution counts over a grid of `(N, n)`; `counts[i][j]` is for `ns[i]`, `dims[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionTable {
    pub dims: Vec<usize>,
    pub ns: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
}

impl SolutionTable {
    pub fn get(&self, dim: usize, n: usize) -> Option<u64> {
        let i = self.ns.iter().position(|&x| x == n)?;
        let j = self.dims.iter().position(|&x| x == dim)?;
        Some(self.counts[i][j])
    }
}

pub fn solution_table(dims: &[usize], ns: &[usize], mode: Execution) -> Result<SolutionTable> {
    let cells: Vec<(usize, usize)> =
        ns.iter().flat_map(|&n| dims.iter().map(move |&d| (d, n))).collect();
    let totals = exec::try_map(mode, &cells, |&(d, n)| solution_count(d, n).map(|c| c.total))?;
    let counts = totals.chunks(dims.len().max(1)).map(<[u64]>::to_vec).collect();
    Ok(SolutionTable { dims: dims.to_vec(), ns: ns.to_vec(), counts })
}

/// A cell where a computed table disagrees with [`GOLDEN_COUNTS`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenMismatch {
    pub dim: usize,
    pub n: usize,
    pub expected: Option<u64>,
    pub found: Option<u64>,
}

/// Compares every golden cell against `table`; missing cells count as mismatches.
pub fn compare_golden(table: &SolutionTable) -> Vec<GoldenMismatch> {
    let mut out = Vec::new();
    for (i, &n) in GOLDEN_NS.iter().enumerate() {
        for (j, &dim) in GOLDEN_DIMS.iter().enumerate() {
            let expected = GOLDEN_COUNTS[i][j];
            let found = table.get(dim, n);
            if found != Some(expected) {
                out.push(GoldenMismatch { dim, n, expected: Some(expected), found });
            }
        }
    }
    out
}

/// Per-class part of a [`KernelReport`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassKernel {
    pub class: SymmetryClass,
    pub kelvin_sign: i32,
    pub gamma: u64,
    pub bifurcation: bool,
    /// `(k, dim)` pairs with nonzero dimension.
    pub basis: Vec<(usize, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAlpha {
    pub family: String,
    pub alpha_star: f64,
    pub cooperative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub dim: usize,
    pub n: usize,
    pub beta_n: f64,
    pub alpha_star: Vec<FamilyAlpha>,
    pub classes: Vec<ClassKernel>,
    pub notes: Vec<String>,
}

impl KernelReport {
    pub fn class(&self, class: SymmetryClass) -> Option<&ClassKernel> {
        self.classes.iter().find(|c| c.class == class)
    }
}

fn class_kernel(dim: usize, n: usize, class: SymmetryClass) -> Result<ClassKernel> {
    let sign = class.kelvin_sign(n);
    let mut basis = Vec::new();
    for k in 0..=n {
        if class.kelvin_sign(k) == 1 {
            let d = harmonic_dim(dim, k, class)?;
            if d > 0 {
                basis.push((k, d));
            }
        }
    }
    let gamma = gamma(dim, n, class)?;
    debug_assert_eq!(gamma, basis.iter().map(|b| b.1).sum::<u64>());
    Ok(ClassKernel { class, kelvin_sign: sign, gamma, bifurcation: is_bifurcation(dim, n, class)?, basis })
}

pub fn kernel_report(dim: usize, n: usize, families: &[SystemFamily]) -> Result<KernelReport> {
    if dim < 3 {
        return Err(Error::Domain(format!("dimension must be at least 3 (got {dim})")));
    }
    if let Some(f) = families.iter().find(|f| f.dim != dim) {
        return Err(Error::Domain(format!("family {f} does not live in dimension {dim}")));
    }
    let mut classes = vec![class_kernel(dim, n, SymmetryClass::Radial)?];
    for m in 1..=dim {
        classes.push(class_kernel(dim, n, SymmetryClass::SectorOdd(m))?);
    }
    if n >= 2 {
        classes.push(class_kernel(dim, n, SymmetryClass::Periodic(n))?);
    }
    let mut notes = Vec::new();
    if n == 0 {
        notes.push("n = 0: beta_0 = 1 lies below every nonradial level".into());
    }
    if n == 1 {
        notes.push("n = 1: alpha*_1 = 1 for every family".into());
    }
    let alpha_star = families
        .iter()
        .map(|f| {
            let a = f.alpha_star(n);
            FamilyAlpha { family: f.kind.label(), alpha_star: a, cooperative: 1.0 - a > 0.0 }
        })
        .collect();
    Ok(KernelReport { dim, n, beta_n: beta_n(dim, n), alpha_star, classes, notes })
}

/// One row of an oracle sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleRow {
    pub dim: usize,
    pub m: usize,
    pub k: usize,
    pub closed_form: u64,
    pub oracle: u64,
}

/// Closed form against the exact oracle for all `N ∈ dims`, `m ≤ min(m_max, N)`, `k ≤ k_max`.
pub fn oracle_sweep(dims: &[usize], m_max: usize, k_max: usize, mode: Execution) -> Result<Vec<OracleRow>> {
    let mut cells = Vec::new();
    for &dim in dims {
        for m in 1..=m_max.min(dim) {
            for k in 0..=k_max {
                cells.push((dim, m, k));
            }
        }
    }
    exec::try_map(mode, &cells, |&(dim, m, k)| {
        Ok(OracleRow {
            dim,
            m,
            k,
            closed_form: harmonic_dim(dim, k, SymmetryClass::SectorOdd(m))?,
            oracle: harmonic_dim_oracle(dim, k, m)?,
        })
    })
}
