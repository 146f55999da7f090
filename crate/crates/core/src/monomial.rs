//! Multi-indices of bounded total degree, in graded lexicographic order.

use alloc::vec;
use alloc::vec::Vec;

/// All `s ∈ ℕ^vars` with `|s| ≤ degree`, sorted by total degree and, within
/// a degree, lexicographically with the first variable's exponent largest
/// first. For two variables and degree 2:
/// `00, 10, 01, 20, 11, 02`.
pub fn multi_indices(vars: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut current = vec![0u32; vars];
        push_with_total(vars, total, 0, &mut current, &mut out);
        if vars == 0 {
            // only the empty index exists
            break;
        }
    }
    out
}

fn push_with_total(vars: usize, remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos + 1 >= vars {
        if vars > 0 {
            current[pos] = remaining;
        }
        out.push(current.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        push_with_total(vars, remaining - e, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// Number of monomials of total degree at most `degree` in `vars` variables,
/// `C(vars + degree, degree)`.
pub fn basis_size(vars: usize, degree: u32) -> usize {
    let mut num = 1u128;
    let mut den = 1u128;
    for k in 1..=degree as u128 {
        num *= vars as u128 + k;
        den *= k;
    }
    (num / den) as usize
}

/// `∏ v_j^{s_j}`.
pub fn evaluate(index: &[u32], v: &[f64]) -> f64 {
    index
        .iter()
        .zip(v)
        .map(|(&e, &x)| libm::pow(x, e as f64))
        .product()
}

pub fn total_degree(index: &[u32]) -> u32 {
    index.iter().sum()
}
