//! Numerical evaluation of the Mellin–Barnes factor
//!
//! ```text
//! F(x) = (2πi)^{-d} ∫_{iR^d} ∏_l Γ(1 − Σ_j c_{lj} λ_j) ∏_j x_j^{λ_j} dλ
//! ```
//!
//! by the trapezoidal rule on λ = iy. The Gamma grid depends only on the
//! spec, so it is built once per step level and reused for every base.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num::complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::{abs_gamma_one_plus_i, gamma};
use crate::structure::MbSpec;

const HEIGHTS: [f64; 7] = [8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0];
const MAX_GRID_NODES: usize = 1 << 22;
const ALIAS_MARGIN: f64 = 36.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MbValue {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub truncation_height: f64,
    pub nodes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MbOptions {
    /// Absolute tolerance for the truncated tail.
    pub tail_tol: f64,
    /// Use this truncation height instead of the adaptive ladder.
    pub height: Option<f64>,
}

impl Default for MbOptions {
    fn default() -> Self {
        MbOptions { tail_tol: 1e-11, height: None }
    }
}

struct Grid {
    h: f64,
    half: usize,
    values: Vec<Complex64>,
    l1: f64,
}

impl Grid {
    fn side(&self) -> usize {
        2 * self.half + 1
    }
}

/// Reusable evaluator for one spec.
pub struct MbEvaluator {
    rows: Vec<Vec<f64>>,
    dim: usize,
    strip: f64,
    height: f64,
    tail: f64,
    levels: Vec<OnceLock<Arc<Grid>>>,
}

fn gamma_product(rows: &[Vec<f64>], lambda: &[Complex64]) -> Complex64 {
    rows.iter()
        .map(|r| {
            let arg = Complex64::new(1.0, 0.0) - r.iter().zip(lambda).map(|(c, l)| *c * *l).sum::<Complex64>();
            if arg == Complex64::new(1.0, 0.0) {
                arg
            } else {
                gamma(arg)
            }
        })
        .product()
}

fn product_modulus(rows: &[Vec<f64>], y: &[f64]) -> f64 {
    rows.iter().map(|r| abs_gamma_one_plus_i(r.iter().zip(y).map(|(c, v)| c * v).sum())).product()
}

/// Index vector of a flattened grid point.
fn unflatten(mut idx: usize, side: usize, dim: usize, half: usize) -> Vec<i64> {
    let mut m = vec![0i64; dim];
    for j in (0..dim).rev() {
        m[j] = (idx % side) as i64 - half as i64;
        idx /= side;
    }
    m
}

impl MbEvaluator {
    pub fn new(spec: &MbSpec, opts: &MbOptions) -> Result<Self> {
        spec.validate()?;
        let rows = spec.gamma_rows_f64();
        let dim = spec.dim;
        if dim > 3 {
            return Err(Error::InvalidInput(format!("Mellin–Barnes dimension {dim} above 3")));
        }
        let row_norm = rows.iter().map(|r| r.iter().map(|c| c.abs()).sum::<f64>()).fold(0.0, f64::max);
        let strip = if row_norm > 0.0 { 1.0 / row_norm } else { 1.0 };
        let mut ev = MbEvaluator { rows, dim, strip, height: 0.0, tail: 0.0, levels: Vec::new() };
        if dim > 0 {
            let decay = (0..dim)
                .map(|j| 0.5 * PI * ev.rows.iter().map(|r| r[j].abs()).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            if decay == 0.0 {
                return Err(Error::Nonconvergent("integrand does not decay along some axis".into()));
            }
            let candidates: Vec<f64> = match opts.height {
                Some(h) => vec![h],
                None => HEIGHTS.to_vec(),
            };
            let mut chosen = None;
            for &y in &candidates {
                let tail = ev.tail_estimate(y, decay);
                if tail <= opts.tail_tol || opts.height.is_some() {
                    chosen = Some((y, tail));
                    break;
                }
            }
            let (height, tail) = chosen.ok_or_else(|| {
                Error::Nonconvergent(format!("tail estimate above {:e} at height {}", opts.tail_tol, HEIGHTS[6]))
            })?;
            ev.height = height;
            ev.tail = tail;
            ev.levels = (0..12).map(|_| OnceLock::new()).collect();
        }
        Ok(ev)
    }

    /// Heuristic bound of the integrand mass outside the box |y_j| ≤ Y:
    /// boundary maximum of the exact modulus times the face measure over
    /// the axis decay rate.
    fn tail_estimate(&self, y: f64, decay: f64) -> f64 {
        let d = self.dim;
        let samples = 33usize;
        let mut worst: f64 = 0.0;
        let mut pt = vec![0.0; d];
        for face in 0..d {
            for sign in [-1.0, 1.0] {
                let count = samples.pow((d - 1) as u32);
                for c in 0..count {
                    let mut c = c;
                    for (j, v) in pt.iter_mut().enumerate() {
                        if j == face {
                            *v = sign * y;
                        } else {
                            *v = -y + 2.0 * y * (c % samples) as f64 / (samples - 1) as f64;
                            c /= samples;
                        }
                    }
                    worst = worst.max(product_modulus(&self.rows, &pt));
                }
            }
        }
        worst * (2.0 * y).powi(d as i32 - 1) * 2.0 * d as f64 / decay / (2.0 * PI).powi(d as i32)
    }

    fn base_step(&self) -> f64 {
        2.0 * PI * self.strip / ALIAS_MARGIN
    }

    fn max_level(&self) -> usize {
        let mut k = 0;
        while k + 1 < self.levels.len() {
            let h = self.base_step() / 2f64.powi(k as i32 + 1);
            let side = 2 * (self.height / h).ceil() as usize + 1;
            if side.saturating_pow(self.dim as u32) > MAX_GRID_NODES {
                break;
            }
            k += 1;
        }
        k
    }

    fn grid(&self, level: usize) -> Arc<Grid> {
        self.levels[level]
            .get_or_init(|| {
                let h = self.base_step() / 2f64.powi(level as i32);
                let half = (self.height / h).ceil() as usize;
                let side = 2 * half + 1;
                let total = side.pow(self.dim as u32);
                let values: Vec<Complex64> = (0..total)
                    .into_par_iter()
                    .map(|idx| {
                        let m = unflatten(idx, side, self.dim, half);
                        let lambda: Vec<Complex64> = m.iter().map(|&mj| Complex64::new(0.0, h * mj as f64)).collect();
                        gamma_product(&self.rows, &lambda)
                    })
                    .collect();
                let l1 = values.iter().map(|v| v.norm()).sum::<f64>() * (h / (2.0 * PI)).powi(self.dim as i32);
                Arc::new(Grid { h, half, values, l1 })
            })
            .clone()
    }

    /// Trapezoidal sum over the grid with steps `stride·h`.
    fn contract(&self, grid: &Grid, log_x: &[f64], stride: usize) -> Complex64 {
        let side = grid.side();
        let h = grid.h * stride as f64;
        let phases: Vec<Vec<Complex64>> = log_x
            .iter()
            .map(|&l| {
                (0..side)
                    .map(|i| {
                        let m = i as i64 - grid.half as i64;
                        if m % stride as i64 != 0 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            Complex64::new(0.0, grid.h * m as f64 * l).exp()
                        }
                    })
                    .collect()
            })
            .collect();
        let mut arr: Vec<Complex64> = grid.values.clone();
        for j in (0..self.dim).rev() {
            let p = &phases[j];
            arr = arr.chunks(side).map(|chunk| chunk.iter().zip(p).map(|(a, b)| a * b).sum()).collect();
        }
        arr[0] * (h / (2.0 * PI)).powi(self.dim as i32)
    }

    fn level_for(&self, log_x: &[f64]) -> Option<usize> {
        let lmax = log_x.iter().map(|l| l.abs()).fold(0.0, f64::max);
        // The doubled step used for the error estimate must resolve log_x too.
        let needed = PI * self.strip / (ALIAS_MARGIN + self.strip * lmax);
        let mut k = 0;
        while self.base_step() / 2f64.powi(k as i32) > needed {
            k += 1;
            if k > self.max_level() {
                return None;
            }
        }
        Some(k)
    }

    /// Bound on |F| by shifting the contour half way to the nearest poles
    /// against the direction of `log_x`.
    fn shifted_bound(&self, log_x: &[f64]) -> f64 {
        let norm = log_x.iter().map(|l| l * l).sum::<f64>().sqrt();
        let dir: Vec<f64> = log_x.iter().map(|l| -l / norm).collect();
        let reach = self.rows.iter().map(|r| r.iter().zip(&dir).map(|(c, u)| c * u).sum::<f64>().abs()).fold(0.0, f64::max);
        let rho = if reach > 0.0 { 0.5 / reach } else { 1.0 };
        let eta: Vec<f64> = dir.iter().map(|u| rho * u).collect();
        let shift = eta.iter().zip(log_x).map(|(e, l)| e * l).sum::<f64>().exp();
        let grid = self.grid(0);
        let side = grid.side();
        let mut mass = 0.0;
        for idx in 0..side.pow(self.dim as u32) {
            let m = unflatten(idx, side, self.dim, grid.half);
            let lambda: Vec<Complex64> = m.iter().zip(&eta).map(|(&mj, &e)| Complex64::new(e, grid.h * mj as f64)).collect();
            mass += gamma_product(&self.rows, &lambda).norm();
        }
        2.0 * shift * (mass * (grid.h / (2.0 * PI)).powi(self.dim as i32) + self.tail)
    }

    /// F at bases given by their logarithms.
    pub fn eval_log(&self, log_x: &[f64]) -> Result<MbValue> {
        if self.dim == 0 {
            return Ok(MbValue { value: 1.0, abs_error_estimate: 0.0, truncation_height: 0.0, nodes: 0 });
        }
        if log_x.len() != self.dim || log_x.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidInput("bases must be positive, one per dimension".into()));
        }
        let Some(level) = self.level_for(log_x) else {
            let bound = self.shifted_bound(log_x);
            return Ok(MbValue { value: 0.0, abs_error_estimate: bound, truncation_height: self.height, nodes: 0 });
        };
        let grid = self.grid(level);
        let fine = self.contract(&grid, log_x, 1);
        let coarse = self.contract(&grid, log_x, 2);
        if fine.im.abs() > 1e-8 * fine.re.abs() + 1e-13 * grid.l1 {
            return Err(Error::Nonconvergent(format!("imaginary residual {:e} in a real integral", fine.im)));
        }
        Ok(MbValue {
            value: fine.re,
            // Trapezoidal errors decay like exp(−c/h): halving h squares the
            // relative error of the coarse sum.
            abs_error_estimate: (fine - coarse).norm().powi(2) / grid.l1 + self.tail + 1e-15 * grid.l1,
            truncation_height: self.height,
            nodes: grid.values.len(),
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<MbValue> {
        if x.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidInput("bases must be positive".into()));
        }
        self.eval_log(&x.iter().map(|v| v.ln()).collect::<Vec<_>>())
    }
}

/// One-shot evaluation of F at bases `x`.
pub fn eval_f(spec: &MbSpec, x: &[f64], opts: &MbOptions) -> Result<MbValue> {
    MbEvaluator::new(spec, opts)?.eval(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfcheckCase {
    pub t: f64,
    pub value: f64,
    pub expected: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfcheckReport {
    pub cases: Vec<SelfcheckCase>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// (1/2πi) ∫_{1/2+iR} Γ(λ)Γ(1−λ) t^{−λ} dλ = 1/(1+t) at t ∈ {0.1, 1, 10}.
pub fn mb_selfcheck() -> SelfcheckReport {
    let h = 0.05;
    let y_max = 40.0;
    let steps = (y_max / h) as i64;
    let cases: Vec<SelfcheckCase> = [0.1f64, 1.0, 10.0]
        .iter()
        .map(|&t| {
            let lt = t.ln();
            let mut sum = Complex64::new(0.0, 0.0);
            for m in -steps..=steps {
                let lam = Complex64::new(0.5, h * m as f64);
                sum += gamma(lam) * gamma(1.0 - lam) * (-lam * lt).exp();
            }
            let value = (sum * h / (2.0 * PI)).re;
            let expected = 1.0 / (1.0 + t);
            SelfcheckCase { t, value, expected, deviation: (value - expected).abs() / expected }
        })
        .collect();
    let max_deviation = cases.iter().map(|c| c.deviation).fold(0.0, f64::max);
    SelfcheckReport { pass: max_deviation <= 1e-6, cases, max_deviation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::q;
    use crate::structure::{PowerTerm, RationalRow};

    fn pair_spec() -> MbSpec {
        MbSpec {
            dim: 1,
            gamma_rows: vec![RationalRow(vec![q(1)]), RationalRow(vec![q(-1)])],
            power_exponents: vec![vec![PowerTerm { var: 1, exponent: q(1) }]],
        }
    }

    #[test]
    fn dim_zero_is_one() {
        let spec = MbSpec { dim: 0, gamma_rows: vec![RationalRow(vec![]), RationalRow(vec![])], power_exponents: vec![] };
        let v = eval_f(&spec, &[], &MbOptions::default()).unwrap();
        assert_eq!(v.value, 1.0);
        assert_eq!(v.abs_error_estimate, 0.0);
    }

    #[test]
    fn gamma_pair_closed_form() {
        let ev = MbEvaluator::new(&pair_spec(), &MbOptions::default()).unwrap();
        for t in [0.1, 0.25, 0.5, 1.0, 3.0, 1e-4] {
            let v = ev.eval(&[t]).unwrap();
            let want = t / (1.0 + t) / (1.0 + t);
            assert!((v.value - want).abs() <= 1e-9 * want, "t={t}: {} vs {want}", v.value);
            assert!(v.abs_error_estimate < 1e-8);
        }
        assert!((ev.eval(&[0.25]).unwrap().value - 0.16).abs() < 1e-12);
    }

    #[test]
    fn far_bases_are_bounded() {
        let ev = MbEvaluator::new(&pair_spec(), &MbOptions::default()).unwrap();
        let v = ev.eval_log(&[-1e6]).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(v.abs_error_estimate < 1e-100);
        let v = ev.eval_log(&[-200.0]).unwrap();
        assert!((v.value - (-200f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_product() {
        // Rows e1, −e1, e2, −e2 factor into two independent pairs.
        let spec = MbSpec {
            dim: 2,
            gamma_rows: vec![
                RationalRow(vec![q(1), q(0)]),
                RationalRow(vec![q(-1), q(0)]),
                RationalRow(vec![q(0), q(1)]),
                RationalRow(vec![q(0), q(-1)]),
            ],
            power_exponents: vec![vec![PowerTerm { var: 1, exponent: q(1) }], vec![PowerTerm { var: 2, exponent: q(1) }]],
        };
        let v = eval_f(&spec, &[0.5, 2.0], &MbOptions::default()).unwrap();
        let f = |t: f64| t / (1.0 + t) / (1.0 + t);
        assert!((v.value - f(0.5) * f(2.0)).abs() < 1e-9);
    }

    #[test]
    fn selfcheck_passes() {
        let r = mb_selfcheck();
        assert!(r.pass, "{r:?}");
        assert!((r.cases[1].value - 0.5).abs() < 1e-6);
    }
}
