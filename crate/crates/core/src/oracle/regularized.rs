use num::complex::Complex64;
use rayon::prelude::*;

use super::{angular_match, kernel_sign, minor_f64, orientation_sign, tau_extrapolate, two_pi_i_pow, OracleValue};
use crate::error::{Error, Result};
use crate::linalg::ExponentMatrix;
use crate::quad::{integrate_box, QuadOptions};
use crate::testform::{Component, TestForm};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    pub quad: QuadOptions,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { quad: QuadOptions { abs_tol: 1e-13, rel_tol: 1e-8, max_panels: 300, initial_panels: 8 } }
    }
}

/// 4⁻¹ … 4⁻⁶ times R^{2·max row degree}.
pub fn default_tau_grid(a: &ExponentMatrix, form: &TestForm) -> Vec<f64> {
    let degree = a.row_sums().into_iter().max().unwrap_or(1);
    let scale = form.natural_scale(degree);
    (1..=6).map(|k| scale * 4f64.powi(-k)).collect()
}

/// One component of p·c_p ∫ τ ⋀ ∂̄f̄_k ∧ φ / (‖f‖² + τ)^{p+1}.
///
/// Returns (value, error estimate, integrand evaluations).
pub fn regularized_t_component(
    a: &ExponentMatrix,
    comp: &Component,
    tau: f64,
    opts: &OracleOptions,
) -> Result<(Complex64, f64, usize)> {
    let (p, n) = (a.p(), a.n());
    let subset = &comp.subset;
    let coeff = &comp.coeff;
    if !angular_match(a, subset, coeff) {
        return Ok((Complex64::new(0.0, 0.0), 0.0, 0));
    }
    let delta = minor_f64(a, subset);
    if delta == 0.0 {
        return Ok((Complex64::new(0.0, 0.0), 0.0, 0));
    }
    let factorial: f64 = (1..=p).map(|k| k as f64).product();
    let constant = kernel_sign(p) * orientation_sign(subset, n) as f64 * factorial * delta * two_pi_i_pow(n - p) * comp.weight;

    // Below u_m = ln t_m < cut_m the integrand is under 1e-16 of its scale.
    let cut_base = p as f64 * tau.ln() + (1e-16f64).ln();
    let mut bounds = Vec::with_capacity(n);
    for m in 0..n {
        let prof = &coeff.profiles[m];
        let hi = prof.support_end().ln();
        let lo = match prof.vanishing_below() {
            Some(t0) => t0.ln(),
            None => (cut_base / (coeff.a[m] + 1) as f64).min(hi - 1.0),
        };
        if lo >= hi {
            return Ok((Complex64::new(0.0, 0.0), 0.0, 0));
        }
        bounds.push((lo, hi));
    }
    let rows: Vec<Vec<f64>> = a.rows().iter().map(|r| r.iter().map(|&e| e as f64).collect()).collect();
    let power = (p + 1) as i32;
    let integrand = |u: &[f64]| -> f64 {
        let mut w = 1.0;
        for m in 0..n {
            let g = coeff.profiles[m].eval(u[m].exp());
            if g == 0.0 {
                return 0.0;
            }
            w *= g * ((coeff.a[m] + 1) as f64 * u[m]).exp();
        }
        let s: f64 = rows.iter().map(|r| r.iter().zip(u).map(|(e, x)| e * x).sum::<f64>().exp()).sum();
        tau * w / (s + tau).powi(power)
    };
    let r = integrate_box(&integrand, &bounds, &opts.quad);
    if !r.converged && r.error > 1e-6 * r.value.abs() {
        return Err(Error::QuadratureNonconvergent(format!(
            "regularized integral for I = {} at τ = {tau:e}: error {:e}",
            subset, r.error
        )));
    }
    Ok((constant * r.value, constant.norm() * r.error, r.evaluations))
}

/// The regularized integral at one τ, summed over components.
pub fn regularized_t(a: &ExponentMatrix, form: &TestForm, tau: f64, opts: &OracleOptions) -> Result<(Complex64, f64, usize)> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput("τ must be positive".into()));
    }
    form.check_degree(a.p(), a.n())?;
    let parts = form
        .components
        .par_iter()
        .map(|c| regularized_t_component(a, c, tau, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().fold((Complex64::new(0.0, 0.0), 0.0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2)))
}

/// Regularized integrals on a τ grid and their extrapolated limit.
pub fn oracle_limit(a: &ExponentMatrix, form: &TestForm, taus: &[f64], opts: &OracleOptions) -> Result<OracleValue> {
    let samples = taus
        .par_iter()
        .map(|&t| regularized_t(a, form, t, opts).map(|(v, e, _)| (t, v, e)))
        .collect::<Result<Vec<_>>>()?;
    let quad_err = samples.iter().map(|s| s.2).fold(0.0, f64::max);
    let pts: Vec<(f64, Complex64)> = samples.iter().map(|s| (s.0, s.1)).collect();
    let mut v = tau_extrapolate(&pts)?;
    v.abs_error_estimate += quad_err;
    Ok(v)
}
