//! Definition-level numerical evaluations used as ground truth.
//!
//! Nothing here looks at the cone engine or the structure formula: every
//! quantity is computed from the regularized integrals and the Mellin
//! transform directly, so agreement with the evaluator is evidence.

mod collapse;
mod extrapolate;
mod mellin;
mod regularized;
mod residue;

pub use collapse::{contour_collapse_check, CollapseOptions, CollapseReport};
pub use extrapolate::{tau_extrapolate, OracleValue};
pub use mellin::{analyticity_scan, mellin_gamma, mellin_gamma_component, pole_probe, PoleProbe, ScanReport};
pub use regularized::{default_tau_grid, oracle_limit, regularized_t, regularized_t_component, OracleOptions};
pub use residue::residue_function_pn;

use num::complex::Complex64;
use num::{BigInt, Signed, ToPrimitive, Zero};

use crate::linalg::{det_bareiss, ExponentMatrix, Subset};
use crate::testform::SeparableCoefficient;

/// Sign of the permutation taking dζ̄_I ∧ dζ_1 ∧ … ∧ dζ_n ∧ dζ̄[I] to
/// ⋀_m (dζ̄_m ∧ dζ_m).
pub fn orientation_sign(subset: &Subset, n: usize) -> i32 {
    let mut seq: Vec<usize> = subset.indices().iter().map(|&i| 2 * i).collect();
    seq.extend((0..n).map(|m| 2 * m + 1));
    seq.extend(subset.complement(n).iter().map(|&k| 2 * k));
    let mut inversions = 0usize;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// `(−1)^{p(p−1)/2}`.
pub(crate) fn kernel_sign(p: usize) -> f64 {
    if (p * (p.saturating_sub(1)) / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn minor(a: &ExponentMatrix, subset: &Subset) -> BigInt {
    det_bareiss(&a.square_minor(subset))
}

pub(crate) fn minor_f64(a: &ExponentMatrix, subset: &Subset) -> f64 {
    let d = minor(a, subset);
    if d.is_zero() {
        0.0
    } else {
        d.to_f64().unwrap_or(if d.is_positive() { f64::INFINITY } else { f64::NEG_INFINITY })
    }
}

/// The angular integrals of the regularized integrand and of the Mellin
/// integrand are nonzero iff a_m − b_m = |α^m| − [m ∈ I] for every m.
pub(crate) fn angular_match(a: &ExponentMatrix, subset: &Subset, coeff: &SeparableCoefficient) -> bool {
    let sums = a.column_sums();
    (0..a.n()).all(|m| coeff.a[m] as i64 - coeff.b[m] as i64 == sums[m] as i64 - subset.contains(m) as i64)
}

pub(crate) fn two_pi_i_pow(k: usize) -> Complex64 {
    Complex64::new(0.0, 2.0 * std::f64::consts::PI).powu(k as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sub(v: &[usize], n: usize) -> Subset {
        Subset::from_one_based(v, n).unwrap()
    }

    #[test]
    fn orientation_small_cases() {
        // n = 1, I = (1): dζ̄1 ∧ dζ1 is already in order.
        assert_eq!(orientation_sign(&sub(&[1], 1), 1), 1);
        // n = p = 2: dζ̄1 dζ̄2 dζ1 dζ2 → dζ̄1 dζ1 dζ̄2 dζ2 is one swap.
        assert_eq!(orientation_sign(&sub(&[1, 2], 2), 2), -1);
        // n = 2, p = 1, I = (1): dζ̄1 dζ1 dζ2 dζ̄2 is one swap.
        assert_eq!(orientation_sign(&sub(&[1], 2), 2), -1);
    }
}
