//! Adaptive Gauss–Kronrod (7/15) quadrature, globally adaptive, for real and
//! complex integrands, plus nested integration over boxes.

use std::cell::Cell;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num::complex::Complex64;

/// Values a quadrature rule can accumulate.
pub trait Integrand: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (estimate, error estimate).
pub fn gk15<T: Integrand>(f: &mut impl FnMut(f64) -> T, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let pair = f(c - x) + f(c + x);
        kronrod = kronrod + pair * WGK[i];
        if i % 2 == 1 {
            gauss = gauss + pair * WG[i / 2];
        }
    }
    let k = kronrod * h;
    let err = ((kronrod - gauss) * h).magnitude();
    (k, err)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    pub initial_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-12, rel_tol: 1e-9, max_panels: 2000, initial_panels: 4 }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions { abs_tol, rel_tol, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`.
pub fn integrate<T: Integrand>(mut f: impl FnMut(f64) -> T, a: f64, b: f64, opts: &QuadOptions) -> QuadResult<T> {
    if a == b {
        return QuadResult { value: T::zero(), error: 0.0, evaluations: 0, converged: true };
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let m = opts.initial_panels.max(1);
    let mut total = T::zero();
    let mut total_err = 0.0;
    for i in 0..m {
        let lo = a + (b - a) * i as f64 / m as f64;
        let hi = if i + 1 == m { b } else { a + (b - a) * (i + 1) as f64 / m as f64 };
        let (v, e) = gk15(&mut f, lo, hi);
        evaluations += 15;
        total = total + v;
        total_err += e;
        heap.push(Panel { a: lo, b: hi, value: v, error: e });
    }
    let tol = |t: &T| opts.abs_tol.max(opts.rel_tol * t.magnitude());
    while total_err > tol(&total) && heap.len() < opts.max_panels {
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        total = total - worst.value + v1 + v2;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum to shed the cancellation error of the running totals.
    let mut value = T::zero();
    let mut error = 0.0;
    for p in heap.iter() {
        value = value + p.value;
        error += p.error;
    }
    QuadResult { value, error, evaluations, converged: error <= tol(&value) }
}

/// Nested adaptive integration over the box `bounds`, outermost variable first.
///
/// The integrand receives the full point. Inner error estimates are
/// propagated into the reported error.
pub fn integrate_box<T: Integrand>(
    f: &dyn Fn(&[f64]) -> T,
    bounds: &[(f64, f64)],
    opts: &QuadOptions,
) -> QuadResult<T> {
    integrate_box_budget(f, bounds, opts, usize::MAX)
}

/// [`integrate_box`] that stops refining inner levels once `budget`
/// integrand calls are spent; the result is then marked unconverged.
pub fn integrate_box_budget<T: Integrand>(
    f: &dyn Fn(&[f64]) -> T,
    bounds: &[(f64, f64)],
    opts: &QuadOptions,
    budget: usize,
) -> QuadResult<T> {
    let evaluations = Cell::new(0usize);
    let converged = Cell::new(true);
    let (value, error) = nested(f, bounds, &[], opts, budget, &evaluations, &converged);
    QuadResult { value, error, evaluations: evaluations.get(), converged: converged.get() }
}

fn nested<T: Integrand>(
    f: &dyn Fn(&[f64]) -> T,
    bounds: &[(f64, f64)],
    prefix: &[f64],
    opts: &QuadOptions,
    budget: usize,
    evaluations: &Cell<usize>,
    converged: &Cell<bool>,
) -> (T, f64) {
    let depth = prefix.len();
    if depth == bounds.len() {
        evaluations.set(evaluations.get() + 1);
        return (f(prefix), 0.0);
    }
    let (a, b) = bounds[depth];
    let mut inner_err = 0.0f64;
    let mut point = prefix.to_vec();
    point.push(0.0);
    let exhausted = evaluations.get() >= budget;
    let level_opts = if exhausted { QuadOptions { max_panels: 0, ..*opts } } else { *opts };
    if exhausted {
        converged.set(false);
    }
    let res = integrate(
        |x| {
            point[depth] = x;
            let (v, e) = nested(f, bounds, &point, opts, budget, evaluations, converged);
            inner_err = inner_err.max(e);
            v
        },
        a,
        b,
        &level_opts,
    );
    if !res.converged {
        converged.set(false);
    }
    (res.value, res.error + (b - a).abs() * inner_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x: f64| x.powi(5) - 3.0 * x * x, 0.0, 2.0, &QuadOptions::default());
        assert!((r.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn peaked_integrand() {
        let r = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, &QuadOptions::default());
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((r.value / exact - 1.0).abs() < 1e-9, "{} vs {exact}", r.value);
    }

    #[test]
    fn complex_oscillatory() {
        let r = integrate(|x: f64| Complex64::new(0.0, 5.0 * x).exp(), 0.0, 1.0, &QuadOptions::default());
        let exact = (Complex64::new(0.0, 5.0).exp() - 1.0) / Complex64::new(0.0, 5.0);
        assert!((r.value - exact).norm() < 1e-12);
    }

    #[test]
    fn box_integration() {
        let f = |x: &[f64]| (x[0] + x[1] * x[2]).exp();
        let r = integrate_box(&f, &[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)], &QuadOptions::with_tol(1e-12, 1e-10));
        // ∫∫∫ e^{x} e^{yz} = (e − 1) ∫_0^1 (e^y − 1)/y dy
        let inner = integrate(|y: f64| if y == 0.0 { 1.0 } else { (y.exp() - 1.0) / y }, 0.0, 1.0, &QuadOptions::default());
        let exact = (std::f64::consts::E - 1.0) * inner.value;
        assert!((r.value - exact).abs() < 1e-9);
        assert!(r.evaluations > 0 && r.converged);
    }

    #[test]
    fn zero_width_interval() {
        let r = integrate(|x: f64| x, 1.0, 1.0, &QuadOptions::default());
        assert_eq!(r.value, 0.0);
        assert_eq!(r.evaluations, 0);
    }
}
