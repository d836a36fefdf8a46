use num::complex::Complex64;

use super::minor;
use crate::error::{Error, Result};
use crate::linalg::{inverse, q, q_to_f64, ExponentMatrix, Subset};
use crate::testform::TestForm;
use num::{Signed, Zero};

/// The residue integral (2πi)^{-n} ∫_{|f_k|² = ε_k} φ / (f₁⋯f_n) for p = n.
///
/// The torus radii solve A·ln t = ln ε. Angular integrals are Cauchy
/// coefficients; the orientation of the torus induced by arg f is sign(Δ).
pub fn residue_function_pn(a: &ExponentMatrix, eps: &[f64], form: &TestForm) -> Result<Complex64> {
    let n = a.n();
    if a.p() != n {
        return Err(Error::InvalidInput("residue function needs p = n".into()));
    }
    if eps.len() != n || eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidInput("ε needs n positive entries".into()));
    }
    form.check_degree(n, n)?;
    let full = Subset::from_zero_based((0..n).collect());
    let delta = minor(a, &full);
    if delta.is_zero() {
        return Err(Error::InvalidMatrix("residue function needs det A ≠ 0".into()));
    }
    let rows: Vec<Vec<_>> = a.rows().iter().map(|r| r.iter().map(|&e| q(e as i64)).collect()).collect();
    let inv = inverse(&rows).expect("nonsingular");
    let log_eps: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let log_t: Vec<f64> = (0..n).map(|m| inv[m].iter().zip(&log_eps).map(|(c, l)| q_to_f64(c) * l).sum()).collect();
    let t: Vec<f64> = log_t.iter().map(|l| l.exp()).collect();
    let sums = a.column_sums();
    let orientation = if delta.is_positive() { 1.0 } else { -1.0 };
    let mut total = Complex64::new(0.0, 0.0);
    for comp in &form.components {
        let c = &comp.coeff;
        for m in 0..n {
            if t[m] >= c.profiles[m].support_end() {
                return Err(Error::RadiiOutsideSupport(format!(
                    "|ζ{}|² = {:e} ≥ R² = {:e}",
                    m + 1,
                    t[m],
                    c.profiles[m].support_end()
                )));
            }
        }
        let matches = (0..n).all(|m| c.a[m] as i64 - c.b[m] as i64 == sums[m] as i64 - 1);
        if !matches {
            continue;
        }
        let v: f64 = (0..n).map(|m| c.profiles[m].eval(t[m]) * t[m].powi(c.b[m] as i32)).product();
        total += comp.weight * v * orientation;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::RadialProfile;
    use crate::testform::SeparableCoefficient;

    fn form(a: &[u32], b: &[u32]) -> TestForm {
        let n = a.len();
        let c = SeparableCoefficient::uniform(a.to_vec(), b.to_vec(), RadialProfile::bump(1.0));
        TestForm::single(Subset::from_zero_based((0..n).collect()), c).unwrap()
    }

    #[test]
    fn identity_torus() {
        let a = ExponentMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let v = residue_function_pn(&a, &[1e-4, 1e-4], &form(&[0, 0], &[0, 0])).unwrap();
        let g = RadialProfile::bump(1.0).eval(1e-4);
        assert!((v.re - g * g).abs() < 1e-15);
        assert!((v.re - 1.0).abs() < 1e-3);
    }

    #[test]
    fn diagonal_torus() {
        let a = ExponentMatrix::new(vec![vec![2, 0], vec![0, 3]]).unwrap();
        let v = residue_function_pn(&a, &[1e-6, 1e-6], &form(&[1, 2], &[0, 0])).unwrap();
        let g = RadialProfile::bump(1.0);
        assert!((v.re - g.eval(1e-3) * g.eval(1e-2)).abs() < 1e-14);
        let z = residue_function_pn(&a, &[1e-6, 1e-6], &form(&[1, 1], &[0, 0])).unwrap();
        assert_eq!(z, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn negative_determinant_orientation() {
        let a = ExponentMatrix::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        let v = residue_function_pn(&a, &[1e-5, 1e-5], &form(&[0, 0], &[0, 0])).unwrap();
        assert!((v.re + 1.0).abs() < 1e-3);
    }

    #[test]
    fn radii_outside_support() {
        let a = ExponentMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert!(matches!(
            residue_function_pn(&a, &[2.0, 1e-3], &form(&[0, 0], &[0, 0])),
            Err(Error::RadiiOutsideSupport(_))
        ));
    }
}
