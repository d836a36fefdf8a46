use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::complex_pair;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    #[serde(with = "complex_pair")]
    pub value: Complex64,
    /// (τ, raw value), τ decreasing.
    pub tau_sequence: Vec<(f64, [f64; 2])>,
    pub extrapolated: bool,
    pub abs_error_estimate: f64,
    pub fit_residual: f64,
    /// Estimated exponent θ of the leading correction c₁τ^θ.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

fn aitken(x: &[Complex64]) -> Vec<Complex64> {
    x.windows(3)
        .map(|w| {
            let d1 = w[1] - w[0];
            let d2 = w[2] - w[1];
            let dd = d2 - d1;
            if dd.norm() <= 1e-300 {
                w[2]
            } else {
                w[2] - d2 * d2 / dd
            }
        })
        .collect()
}

/// Successive-difference ratios Δx_{k+1}/Δx_k, or None where a difference is
/// negligible.
fn ratios(x: &[Complex64], scale: f64) -> Vec<Option<Complex64>> {
    x.windows(3)
        .map(|w| {
            let d1 = w[1] - w[0];
            let d2 = w[2] - w[1];
            if d1.norm() <= 1e-13 * scale || d2.norm() <= 1e-13 * scale {
                None
            } else {
                Some(d2 / d1)
            }
        })
        .collect()
}

/// Limit τ → 0 of samples on a geometric τ grid.
///
/// The model c₀ + c₁τ^θ (+ c₂τ^θ log τ) is removed by iterated Aitken Δ²
/// steps; the spread of the deepest level serves as the fit residual.
pub fn tau_extrapolate(samples: &[(f64, Complex64)]) -> Result<OracleValue> {
    if samples.len() < 4 {
        return Err(Error::InvalidInput("need at least 4 τ samples".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| b.0.total_cmp(&a.0));
    let tau_sequence = s.iter().map(|(t, v)| (*t, [v.re, v.im])).collect();
    let x: Vec<Complex64> = s.iter().map(|p| p.1).collect();
    let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let spread = x
        .iter()
        .flat_map(|a| x.iter().map(move |b| (a - b).norm()))
        .fold(0.0, f64::max);
    let last = *x.last().unwrap();
    if spread <= 1e-14 * scale.max(1e-300) || scale == 0.0 {
        return Ok(OracleValue {
            value: last,
            tau_sequence,
            extrapolated: false,
            abs_error_estimate: spread,
            fit_residual: 0.0,
            theta: None,
        });
    }

    let first = ratios(&x, scale);
    let good = |r: &Complex64| r.re > 0.0 && r.norm() < 1.0 && r.im.abs() <= 0.5 * r.re;
    let trailing: Vec<Complex64> = first.iter().rev().take(2).flatten().copied().collect();
    if trailing.is_empty() || !trailing.iter().all(good) {
        return Err(Error::NonconvergentFit(format!("differences do not contract geometrically: {first:?}")));
    }
    let ratio = trailing[0];
    let tau_ratio = s[s.len() - 1].0 / s[s.len() - 2].0;
    let theta = ratio.norm().ln() / tau_ratio.ln();

    let mut levels = vec![x];
    while levels.last().unwrap().len() >= 3 {
        let cur = levels.last().unwrap();
        let r = ratios(cur, scale);
        if levels.len() > 1 && r.iter().flatten().any(|z| !good(z)) {
            break;
        }
        let next = aitken(cur);
        let converged = next.len() >= 2 && (next[next.len() - 1] - next[next.len() - 2]).norm() <= 1e-13 * scale;
        levels.push(next);
        if converged {
            break;
        }
    }
    let deepest = levels.last().unwrap();
    let value = *deepest.last().unwrap();
    let residual = if deepest.len() >= 2 {
        (deepest[deepest.len() - 1] - deepest[deepest.len() - 2]).norm()
    } else {
        let prev = &levels[levels.len() - 2];
        (value - prev[prev.len() - 1]).norm()
    };
    if residual > 0.05 * spread {
        return Err(Error::NonconvergentFit(format!(
            "fit residual {residual:e} exceeds 5% of the sample spread {spread:e}"
        )));
    }
    Ok(OracleValue {
        value,
        tau_sequence,
        extrapolated: true,
        abs_error_estimate: residual,
        fit_residual: residual,
        theta: Some(theta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(k: usize, f: impl Fn(f64) -> f64) -> Vec<(f64, Complex64)> {
        (1..=k).map(|i| {
            let t = 4f64.powi(-(i as i32));
            (t, Complex64::new(f(t), 0.0))
        })
        .collect()
    }

    #[test]
    fn constant_samples() {
        let r = tau_extrapolate(&grid(5, |_| 2.5)).unwrap();
        assert_eq!(r.value, Complex64::new(2.5, 0.0));
        assert_eq!(r.fit_residual, 0.0);
        assert!(!r.extrapolated);
    }

    #[test]
    fn square_root_model() {
        let r = tau_extrapolate(&grid(4, |t| 1.0 + t.sqrt())).unwrap();
        assert!((r.value.re - 1.0).abs() < 1e-3);
        assert!((r.theta.unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn logarithmic_model() {
        for k in 1..=3 {
            let f = move |t: f64| 1.0 + k as f64 * t * t.ln() - 0.3 * t;
            let r = tau_extrapolate(&grid(8, f)).unwrap();
            assert!((r.value.re - 1.0).abs() < 1e-2, "k={k}: {}", r.value);
        }
    }

    #[test]
    fn alternating_noise_fails() {
        let s: Vec<(f64, Complex64)> =
            (1..=6).map(|i| (4f64.powi(-i), Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0))).collect();
        assert!(matches!(tau_extrapolate(&s), Err(Error::NonconvergentFit(_))));
    }

    #[test]
    fn too_few_samples() {
        assert!(tau_extrapolate(&grid(3, |t| t)).is_err());
    }
}
