//! Brute-force dimension of invariant harmonic polynomials.
//!
//! Polynomials invariant under `O(N-m)` in the first `N-m` variables and odd in
//! each of the last `m` variables are spanned by monomials
//! `q^a y_1^{b_1} ⋯ y_m^{b_m}` with every `b_i` odd, where `q = x_1² + … + x_{N-m}²`.
//! The harmonic ones form the kernel of the Laplacian, assembled here as an
//! exact integer matrix.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Largest degree the oracle accepts.
pub const ORACLE_MAX_DEGREE: usize = 12;

/// Exponent tuple `(a, b_1, …, b_m)`.
type Monomial = Vec<usize>;

/// All `(a, b)` with odd `b_i ≥ 1` and `2a + Σ b_i = degree`.
pub fn invariant_monomials(m: usize, degree: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; m + 1];
    fill(m, degree, 1, &mut cur, &mut out);
    out
}

fn fill(m: usize, remaining: usize, slot: usize, cur: &mut Monomial, out: &mut Vec<Monomial>) {
    if slot > m {
        if remaining.is_multiple_of(2) {
            cur[0] = remaining / 2;
            out.push(cur.clone());
        }
        return;
    }
    // Each later slot needs at least 1.
    let reserve = m - slot;
    let mut b = 1;
    while b + reserve <= remaining {
        cur[slot] = b;
        fill(m, remaining - b, slot + 1, cur, out);
        b += 2;
    }
}

/// Integer matrix of the Laplacian from degree `k` to degree `k-2`, columns
/// indexed by the domain monomials.
pub fn laplacian_matrix(dim: usize, m: usize, k: usize) -> (Vec<Vec<i64>>, usize) {
    let domain = invariant_monomials(m, k);
    let codomain = if k >= 2 { invariant_monomials(m, k - 2) } else { Vec::new() };
    let index: HashMap<&Monomial, usize> = codomain.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let free = dim as i64 - m as i64;
    let mut mat = vec![vec![0i64; domain.len()]; codomain.len()];
    for (col, mono) in domain.iter().enumerate() {
        let a = mono[0] as i64;
        if a > 0 {
            // Δ(q^a) = 2a(2a + N - m - 2) q^{a-1}
            let coef = 2 * a * (2 * a + free - 2);
            let mut img = mono.clone();
            img[0] -= 1;
            mat[index[&img]][col] += coef;
        }
        for i in 1..=m {
            let b = mono[i];
            if b >= 3 {
                let mut img = mono.clone();
                img[i] -= 2;
                mat[index[&img]][col] += (b * (b - 1)) as i64;
            }
        }
    }
    (mat, domain.len())
}

/// Rank over the rationals by fraction-free (Bareiss) elimination.
pub fn exact_rank(rows: &[Vec<i64>]) -> usize {
    let nrows = rows.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = rows[0].len();
    let mut a: Vec<Vec<BigInt>> =
        rows.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
    let mut prev = BigInt::one();
    let mut rank = 0;
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        let Some(piv) = (rank..nrows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, piv);
        for r in rank + 1..nrows {
            for c in col + 1..ncols {
                let v = (&a[rank][col] * &a[r][c] - &a[r][col] * &a[rank][c]) / &prev;
                a[r][c] = v;
            }
            a[r][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Dimension of harmonic polynomials of degree `k` in `R^N` that are
/// `O(N-m)`-invariant and odd in each of the last `m` variables.
pub fn harmonic_dim_oracle(dim: usize, k: usize, m: usize) -> Result<u64> {
    if dim < 3 {
        return Err(Error::Domain(format!("dimension must be at least 3 (got {dim})")));
    }
    if m == 0 || m > dim {
        return Err(Error::Domain(format!("need 1 <= m <= N (got m = {m}, N = {dim})")));
    }
    if k > ORACLE_MAX_DEGREE {
        return Err(Error::Resource(format!(
            "oracle degree {k} exceeds the limit {ORACLE_MAX_DEGREE}"
        )));
    }
    let (mat, ncols) = laplacian_matrix(dim, m, k);
    Ok((ncols - exact_rank(&mat)) as u64)
}

/// `dim P_k - dim P_{k-2}` from counting invariant monomials alone.
pub fn harmonic_dim_by_counting(m: usize, k: usize) -> u64 {
    let top = invariant_monomials(m, k).len() as u64;
    let below = if k >= 2 { invariant_monomials(m, k - 2).len() as u64 } else { 0 };
    top - below
}
