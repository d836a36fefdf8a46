use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{angular_match, kernel_sign, minor_f64, orientation_sign, two_pi_i_pow};
use crate::error::{Error, Result};
use crate::evaluator::complex_pair;
use crate::linalg::ExponentMatrix;
use crate::quad::QuadOptions;
use crate::testform::{Component, TestForm};

pub(crate) fn mellin_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-15, rel_tol: 1e-11, max_panels: 2000, initial_panels: 8 }
}

/// ⟨α^m, s⟩ for every column m.
pub(crate) fn column_pairings(a: &ExponentMatrix, s: &[Complex64]) -> Vec<Complex64> {
    (0..a.n()).map(|m| a.column(m).iter().zip(s).map(|(&e, &z)| z * e as f64).sum()).collect()
}

/// The s-independent factor (−1)^{p(p−1)/2} σ_I Δ_I (2πi)^{n−p} w of Γ^I, or
/// None when the component contributes nothing.
pub(crate) fn component_constant(a: &ExponentMatrix, comp: &Component) -> Option<Complex64> {
    let (p, n) = (a.p(), a.n());
    if !angular_match(a, &comp.subset, &comp.coeff) {
        return None;
    }
    let delta = minor_f64(a, &comp.subset);
    if delta == 0.0 {
        return None;
    }
    Some(kernel_sign(p) * orientation_sign(&comp.subset, n) as f64 * delta * two_pi_i_pow(n - p) * comp.weight)
}

/// Mellin argument of variable m: ⟨α^m, s⟩ − [m ∈ I] + b_m.
pub(crate) fn radial_argument(comp: &Component, m: usize, pairing: Complex64) -> Complex64 {
    pairing - comp.subset.contains(m) as i32 as f64 + comp.coeff.b[m] as f64
}

/// Γ^I(s, φ) for one component; with `continued` the radial Mellin
/// transforms are continued past their abscissa of convergence.
pub(crate) fn component_value(
    a: &ExponentMatrix,
    comp: &Component,
    s: &[Complex64],
    continued: bool,
) -> Result<Complex64> {
    let Some(mut value) = component_constant(a, comp) else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let lam = column_pairings(a, s);
    let opts = mellin_opts();
    for (m, &l) in lam.iter().enumerate() {
        let z = radial_argument(comp, m, l);
        let prof = &comp.coeff.profiles[m];
        if !continued && z.re <= -1.0 && prof.vanishing_below().is_none() {
            return Err(Error::NonintegrableParameters(format!(
                "radial exponent {z} for variable {} of I = {}",
                m + 1,
                comp.subset
            )));
        }
        value *= prof.mellin(z, &opts)?.0;
    }
    Ok(value)
}

/// Γ^I(s, φ) for one component, as an absolutely convergent integral.
pub fn mellin_gamma_component(a: &ExponentMatrix, comp: &Component, s: &[Complex64]) -> Result<Complex64> {
    component_value(a, comp, s, false)
}

/// Γ(s, φ) = Σ_I Γ^I(s, φ).
pub fn mellin_gamma(a: &ExponentMatrix, s: &[Complex64], form: &TestForm) -> Result<Complex64> {
    if s.len() != a.p() {
        return Err(Error::InvalidInput(format!("s needs {} entries", a.p())));
    }
    form.check_degree(a.p(), a.n())?;
    form.components.iter().map(|c| mellin_gamma_component(a, c, s)).sum()
}

fn mellin_gamma_continued(a: &ExponentMatrix, s: &[Complex64], form: &TestForm) -> Result<Complex64> {
    form.components.iter().map(|c| component_value(a, c, s, true)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleProbe {
    pub column: usize,
    pub direction: Vec<f64>,
    pub deltas: Vec<f64>,
    pub products: Vec<[f64; 2]>,
    /// The last two products agree within 5% and successive changes shrink.
    pub stabilized: bool,
    /// The products shrink by at least a factor 5 per decade.
    pub vanishing: bool,
    #[serde(with = "complex_pair")]
    pub limit_estimate: Complex64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

/// Samples ⟨α^k, s − s0⟩·Γ(s, φ) along s = s0 + δ·direction, δ ∈ {10⁻¹, 10⁻², 10⁻³}.
///
/// `column` is 1-based. Γ is evaluated through its meromorphic continuation.
pub fn pole_probe(a: &ExponentMatrix, form: &TestForm, column: usize, direction: &[f64], base: Option<&[f64]>) -> Result<PoleProbe> {
    let p = a.p();
    if column == 0 || column > a.n() || direction.len() != p {
        return Err(Error::InvalidInput("probe column or direction out of range".into()));
    }
    let s0: Vec<f64> = base.map(|b| b.to_vec()).unwrap_or_else(|| vec![0.0; p]);
    let deltas = vec![1e-1, 1e-2, 1e-3];
    let alpha = a.column(column - 1);
    let transversal: f64 = alpha.iter().zip(direction).map(|(&e, d)| e as f64 * d).sum();
    let mut report = PoleProbe {
        column,
        direction: direction.to_vec(),
        deltas: deltas.clone(),
        products: Vec::new(),
        stabilized: false,
        vanishing: false,
        limit_estimate: Complex64::new(0.0, 0.0),
        rejected: None,
    };
    if transversal.abs() < 1e-12 {
        report.rejected = Some("direction lies in the pole hyperplane".into());
        return Ok(report);
    }
    let mut prods = Vec::new();
    for &d in &deltas {
        let s: Vec<Complex64> = s0.iter().zip(direction).map(|(b, v)| Complex64::new(b + d * v, 0.0)).collect();
        prods.push(mellin_gamma_continued(a, &s, form)? * (d * transversal));
    }
    report.products = prods.iter().map(|z| [z.re, z.im]).collect();
    let (x1, x2, x3) = (prods[0], prods[1], prods[2]);
    let scale = x3.norm().max(x2.norm());
    report.stabilized = scale > 0.0 && (x3 - x2).norm() <= 0.05 * scale && (x3 - x2).norm() <= (x2 - x1).norm();
    report.vanishing = x2.norm() <= 0.2 * x1.norm() && x3.norm() <= 0.2 * x2.norm() || scale == 0.0;
    // Linear extrapolation to δ = 0 from the last two samples.
    report.limit_estimate = x3 - (x2 - x3) * (deltas[2] / (deltas[1] - deltas[2]));
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub points: usize,
    pub max_abs_value: f64,
    pub max_second_difference: f64,
    pub smooth: bool,
    pub probes_stabilized: usize,
}

/// Γ along the segment from `start` to `end`: second differences must stay
/// small relative to the values, and pole probes at interior points in the
/// column directions must not stabilize.
pub fn analyticity_scan(a: &ExponentMatrix, form: &TestForm, start: &[f64], end: &[f64], points: usize) -> Result<ScanReport> {
    let p = a.p();
    if start.len() != p || end.len() != p || points < 3 {
        return Err(Error::InvalidInput("segment endpoints need p entries and ≥ 3 points".into()));
    }
    let at = |k: usize| -> Vec<f64> {
        let w = k as f64 / (points - 1) as f64;
        start.iter().zip(end).map(|(x, y)| x + w * (y - x)).collect()
    };
    let mut values = Vec::with_capacity(points);
    for k in 0..points {
        let s: Vec<Complex64> = at(k).iter().map(|&x| Complex64::new(x, 0.0)).collect();
        values.push(mellin_gamma(a, &s, form)?);
    }
    let max_abs_value = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let max_second_difference = values.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]).norm()).fold(0.0, f64::max);
    let first = values.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max);
    let smooth = values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
        && max_second_difference <= 0.5 * first + 1e-12 * max_abs_value;
    let mut probes_stabilized = 0;
    for k in [points / 4, points / 2, 3 * points / 4] {
        let base = at(k);
        for col in 1..=a.n() {
            let dir: Vec<f64> = a.column(col - 1).iter().map(|&e| e as f64 + 0.1).collect();
            let r = pole_probe(a, form, col, &dir, Some(&base))?;
            if r.stabilized && r.limit_estimate.norm() > 1e-6 * max_abs_value.max(1e-300) {
                probes_stabilized += 1;
            }
        }
    }
    Ok(ScanReport { points, max_abs_value, max_second_difference, smooth: smooth && probes_stabilized == 0, probes_stabilized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Subset;
    use crate::profile::RadialProfile;
    use crate::quad::integrate;
    use crate::testform::SeparableCoefficient;

    fn form(i: &[usize], a: &[u32], b: &[u32]) -> TestForm {
        let c = SeparableCoefficient::uniform(a.to_vec(), b.to_vec(), RadialProfile::bump(1.0));
        TestForm::single(Subset::from_one_based(i, a.len()).unwrap(), c).unwrap()
    }

    fn one_d() -> (ExponentMatrix, TestForm) {
        (ExponentMatrix::new(vec![vec![2]]).unwrap(), form(&[1], &[1], &[0]))
    }

    #[test]
    fn leading_pole_one_dimensional() {
        let (a, f) = one_d();
        let v = mellin_gamma(&a, &[Complex64::new(0.01, 0.0)], &f).unwrap();
        // Δ · ∫ t^{2s−1} g ≈ 2 · g(0)/(2s).
        assert!((v.re - 100.0).abs() < 5.0, "{v}");
    }

    #[test]
    fn regular_point_matches_direct_quadrature() {
        let (a, f) = one_d();
        let v = mellin_gamma(&a, &[Complex64::new(1.0, 0.0)], &f).unwrap();
        let g = RadialProfile::bump(1.0);
        let direct = integrate(|t: f64| 2.0 * t * g.eval(t), 0.0, 1.0, &QuadOptions::default());
        assert!((v.re - direct.value).abs() < 1e-4 * direct.value);
    }

    #[test]
    fn nonintegrable_is_reported() {
        let (a, f) = one_d();
        assert!(matches!(
            mellin_gamma(&a, &[Complex64::new(-0.2, 0.0)], &f),
            Err(Error::NonintegrableParameters(_))
        ));
    }

    #[test]
    fn angular_violation_is_zero() {
        let (a, _) = one_d();
        let v = mellin_gamma(&a, &[Complex64::new(0.3, 0.0)], &form(&[1], &[0], &[0])).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn probe_stabilizes_in_one_dimension() {
        let (a, f) = one_d();
        let r = pole_probe(&a, &f, 1, &[1.0], None).unwrap();
        assert!(r.stabilized, "{r:?}");
        assert!((r.limit_estimate.re - 2.0).abs() < 0.05);
        let r = pole_probe(&a, &f, 1, &[0.0], None).unwrap();
        assert!(r.rejected.is_some());
    }

    #[test]
    fn probe_without_excited_pole_vanishes() {
        // A = identity, degrees a = b = (1, 0): the radial exponent s₁ has no pole at 0.
        let a = ExponentMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let f = form(&[1, 2], &[1, 0], &[1, 0]);
        let r = pole_probe(&a, &f, 1, &[1.0, 1.0], Some(&[0.0, 0.3])).unwrap();
        assert!(r.vanishing && !r.stabilized, "{r:?}");
    }

    #[test]
    fn segment_in_positive_orthant_is_smooth() {
        let (a, f) = one_d();
        let r = analyticity_scan(&a, &f, &[0.2], &[1.5], 25).unwrap();
        assert!(r.smooth, "{r:?}");
    }
}
