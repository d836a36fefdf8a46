//! Pairing of structure-formula terms with separable test forms.
//!
//! For a term with index sets J ⊂ I, the J-variables are consumed by the
//! ∂̄ brackets (derivatives at the origin), the remaining variables are
//! integrated in polar coordinates: angular integrals are exact selection
//! rules, radial integrals run in t = |ζ|² (logarithmic coordinates where F
//! is involved).

use std::cell::RefCell;
use std::f64::consts::PI;

use num::complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ExponentMatrix;
use crate::mb::{MbEvaluator, MbOptions};
use crate::profile::RadialProfile;
use crate::quad::{integrate_box_budget, QuadOptions};
use crate::structure::{decompose, CurrentTerm};
use crate::testform::{Component, SeparableCoefficient, TestForm};

/// Integrand calls allowed per coupled radial integral.
const RADIAL_BUDGET: usize = 1_000_000;

/// Normalization of the reported value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Limit of the regularized integrals; brackets act by
    /// (1/(k−1)!) ∂^{k−1} at the origin.
    #[default]
    Definition,
    /// One-variable brackets normalized as ⟨∂̄[1/z^k], φ⟩ = (2πi/(k−1)!) ∂^{k−1}φ̃(0):
    /// each term is multiplied by (2πi)^q.
    Bracket,
}

impl Convention {
    pub fn factor(self, q: usize) -> Complex64 {
        match self {
            Convention::Definition => Complex64::new(1.0, 0.0),
            Convention::Bracket => Complex64::new(0.0, 2.0 * PI).powu(q as u32),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub quad: QuadOptions,
    pub mb: MbOptions,
    pub convention: Convention,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            quad: QuadOptions { abs_tol: 1e-13, rel_tol: 1e-9, max_panels: 400, initial_panels: 4 },
            mb: MbOptions::default(),
            convention: Convention::Definition,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Dbar,
    ConjPv,
    Pv,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableRule {
    pub var: usize,
    pub role: Role,
    pub keep: bool,
    /// Power of t = |ζ|² left in the radial integrand, for kept PV variables.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial_exponent: Option<i64>,
}

/// The ζ_J-derivative part of a coefficient: either zero or the constant
/// ∏ g_j(0), with the coefficient on the remaining variables unchanged.
#[derive(Clone, Debug, PartialEq)]
pub enum PhiAlpha {
    Zero,
    Factor(f64),
}

/// ∏_{j∈J} (1/(k_j−1)!) ∂^{k_j−1}_{ζ_j} at ζ_j = 0, with `powers[i]` = k_j
/// for the i-th element of `j_vars` (0-based).
pub fn phi_alpha(coeff: &SeparableCoefficient, j_vars: &[usize], powers: &[u32]) -> PhiAlpha {
    let mut factor = 1.0;
    for (&j, &k) in j_vars.iter().zip(powers) {
        if coeff.b[j] != 0 || coeff.a[j] + 1 != k {
            return PhiAlpha::Zero;
        }
        let g0 = coeff.profiles[j].value_at_zero();
        if g0 == 0.0 {
            return PhiAlpha::Zero;
        }
        factor *= g0;
    }
    PhiAlpha::Factor(factor)
}

/// Angular selection for the variables outside J.
pub fn angular_rule(term: &CurrentTerm, coeff: &SeparableCoefficient) -> Vec<VariableRule> {
    let mut rules = Vec::new();
    for f in &term.conj_pv_factors {
        let (a, b) = (coeff.a[f.var - 1] as i64, coeff.b[f.var - 1] as i64);
        let keep = a - f.power as i64 == b - f.conj_power as i64;
        rules.push(VariableRule { var: f.var, role: Role::ConjPv, keep, radial_exponent: keep.then_some(b - 1) });
    }
    for f in &term.pv_factors {
        let (a, b) = (coeff.a[f.var - 1] as i64, coeff.b[f.var - 1] as i64);
        let keep = a - f.power as i64 == b;
        rules.push(VariableRule { var: f.var, role: Role::Pv, keep, radial_exponent: keep.then_some(b) });
    }
    rules.sort_by_key(|r| r.var);
    rules
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentTrace {
    pub weight: [f64; 2],
    pub rules: Vec<VariableRule>,
    pub phi_alpha: Option<f64>,
    pub value: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermTrace {
    #[serde(rename = "I")]
    pub subset: String,
    pub components: Vec<ComponentTrace>,
    pub value: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    #[serde(with = "complex_pair")]
    pub value: Complex64,
    pub abs_error_estimate: f64,
    pub convention: Convention,
    pub quadrature_evaluations: usize,
    pub selection_trace: Vec<TermTrace>,
}

pub mod complex_pair {
    use num::complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

fn pair_of(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

struct Radial {
    value: f64,
    error: f64,
    evaluations: usize,
}

/// Rate at which F decays as the conj-PV variable owning base `j` tends to 0.
fn base_decay(term: &CurrentTerm, j: usize) -> f64 {
    let mb = term.mb.as_ref().expect("coupled variables imply F");
    let rows = mb.gamma_rows_f64();
    let m = rows.iter().map(|r| r[j].abs()).fold(0.0, f64::max);
    if m > 0.0 {
        1.0 / m
    } else {
        1.0
    }
}

fn lower_log_limit(profile: &RadialProfile, rate: f64) -> f64 {
    match profile.vanishing_below() {
        Some(t0) => t0.ln(),
        None => profile.support_end().ln() - 46.0 / rate,
    }
}

/// ∫ ∏_m t_m^{e_m} g_m(t_m) F(t) dt over the coupled variables.
fn coupled_integral(
    term: &CurrentTerm,
    evaluator: &MbEvaluator,
    coeff: &SeparableCoefficient,
    exponents: &[(usize, i64)],
    opts: &EvalOptions,
) -> Result<Radial> {
    let mb = term.mb.as_ref().expect("coupled variables imply F");
    let conj: Vec<usize> = term.conj_pv_factors.iter().map(|f| f.var).collect();
    let bounds: Vec<(f64, f64)> = exponents
        .iter()
        .map(|&(var, e)| {
            let p = &coeff.profiles[var - 1];
            let rate = match conj.iter().position(|&v| v == var) {
                Some(j) if e + 1 == 0 => base_decay(term, j),
                _ => (e + 1) as f64,
            };
            (lower_log_limit(p, rate), p.support_end().ln())
        })
        .collect();
    if bounds.iter().any(|(lo, hi)| lo >= hi) {
        return Ok(Radial { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let n = term.n;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let mb_err = RefCell::new(0.0f64);
    let integrand = |u: &[f64]| -> f64 {
        let mut log_t = vec![0.0; n];
        let mut w = 1.0;
        for (k, &(var, e)) in exponents.iter().enumerate() {
            log_t[var - 1] = u[k];
            let t = u[k].exp();
            w *= ((e + 1) as f64 * u[k]).exp() * coeff.profiles[var - 1].eval(t);
        }
        if w == 0.0 {
            return 0.0;
        }
        match evaluator.eval_log(&mb.log_bases(&log_t)) {
            Ok(v) => {
                let mut m = mb_err.borrow_mut();
                *m = m.max(v.abs_error_estimate);
                w * v.value
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let r = integrate_box_budget(&integrand, &bounds, &opts.quad, RADIAL_BUDGET);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    // Mass of the non-F weight bounds how the pointwise MB error propagates.
    let mut mass = 1.0;
    for (&(var, e), &(lo, hi)) in exponents.iter().zip(&bounds) {
        let p = &coeff.profiles[var - 1];
        let m = crate::quad::integrate(|u: f64| ((e + 1) as f64 * u).exp() * p.eval(u.exp()), lo, hi, &opts.quad);
        mass *= m.value.abs();
    }
    let error = r.error + mass * mb_err.into_inner();
    if !r.converged && r.error > 1e-6 * r.value.abs().max(1e-300) {
        return Err(Error::QuadratureNonconvergent(format!(
            "radial integral for I = {} stalled at error {:e}",
            term.subset, r.error
        )));
    }
    Ok(Radial { value: r.value, error, evaluations: r.evaluations })
}

struct Contribution {
    value: Complex64,
    error: f64,
    evaluations: usize,
    trace: ComponentTrace,
}

fn pair_component(
    term: &CurrentTerm,
    evaluator: Option<&MbEvaluator>,
    comp: &Component,
    opts: &EvalOptions,
) -> Result<Contribution> {
    let coeff = &comp.coeff;
    let j_vars: Vec<usize> = term.dbar_factors.iter().map(|f| f.var - 1).collect();
    let powers: Vec<u32> = term.dbar_factors.iter().map(|f| f.power).collect();
    let mut rules: Vec<VariableRule> = term
        .dbar_factors
        .iter()
        .map(|f| {
            let keep = coeff.b[f.var - 1] == 0 && coeff.a[f.var - 1] + 1 == f.power;
            VariableRule { var: f.var, role: Role::Dbar, keep, radial_exponent: None }
        })
        .collect();
    let outer = angular_rule(term, coeff);
    rules.extend(outer.iter().cloned());
    rules.sort_by_key(|r| r.var);
    let zero = |rules: Vec<VariableRule>, pa: Option<f64>| Contribution {
        value: Complex64::new(0.0, 0.0),
        error: 0.0,
        evaluations: 0,
        trace: ComponentTrace { weight: pair_of(comp.weight), rules, phi_alpha: pa, value: [0.0, 0.0] },
    };
    let PhiAlpha::Factor(pa) = phi_alpha(coeff, &j_vars, &powers) else {
        return Ok(zero(rules, None));
    };
    if outer.iter().any(|r| !r.keep) || comp.weight == Complex64::new(0.0, 0.0) {
        return Ok(zero(rules, Some(pa)));
    }

    let coupled = term.mb.as_ref().map(|m| m.coupled_vars()).unwrap_or_default();
    let mut value = 1.0;
    let mut rel_err = 0.0;
    let mut evaluations = 0;
    let mut coupled_exps = Vec::new();
    for r in &outer {
        let e = r.radial_exponent.expect("kept rule has an exponent");
        if coupled.contains(&r.var) {
            coupled_exps.push((r.var, e));
        } else {
            let (m, err, ev) = coeff.profiles[r.var - 1].moment(e as u32, &opts.quad);
            value *= m;
            rel_err += if m != 0.0 { err / m.abs() } else { 0.0 };
            evaluations += ev;
        }
    }
    let coupled_factor = if coupled_exps.is_empty() {
        1.0
    } else {
        let ev = evaluator.expect("coupled variables imply F");
        let r = coupled_integral(term, ev, coeff, &coupled_exps, opts)?;
        evaluations += r.evaluations;
        if r.value != 0.0 {
            rel_err += r.error / r.value.abs();
        } else {
            rel_err = f64::INFINITY;
        }
        r.value
    };
    let radial = value * coupled_factor;
    let abs_radial_err = if radial == 0.0 { 0.0 } else { radial.abs() * rel_err };
    let constant = Complex64::new(0.0, 2.0 * PI).powu((term.n - term.p()) as u32)
        * term.effective_sign() as f64
        * pa
        * comp.weight
        * opts.convention.factor(term.q());
    let value = constant * radial;
    Ok(Contribution {
        value,
        error: constant.norm() * abs_radial_err,
        evaluations,
        trace: ComponentTrace { weight: pair_of(comp.weight), rules, phi_alpha: Some(pa), value: pair_of(value) },
    })
}

fn pair_with(term: &CurrentTerm, evaluator: Option<&MbEvaluator>, form: &TestForm, opts: &EvalOptions) -> Result<(Complex64, f64, usize, TermTrace)> {
    let mut total = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut evaluations = 0;
    let mut comps = Vec::new();
    for comp in form.components_for(&term.subset) {
        let c = pair_component(term, evaluator, comp, opts)?;
        total += c.value;
        error += c.error;
        evaluations += c.evaluations;
        comps.push(c.trace);
    }
    let trace = TermTrace { subset: term.subset.to_string(), components: comps, value: pair_of(total) };
    Ok((total, error, evaluations, trace))
}

fn term_evaluator(term: &CurrentTerm, opts: &EvalOptions) -> Result<Option<MbEvaluator>> {
    term.mb.as_ref().map(|mb| MbEvaluator::new(mb, &opts.mb)).transpose()
}

/// ⟨term, φ⟩.
pub fn pair(term: &CurrentTerm, form: &TestForm, opts: &EvalOptions) -> Result<PairingResult> {
    if form.n != term.n {
        return Err(Error::InvalidTestForm(format!("test form has n = {}, term has n = {}", form.n, term.n)));
    }
    let ev = term_evaluator(term, opts)?;
    let (value, abs_error_estimate, quadrature_evaluations, trace) = pair_with(term, ev.as_ref(), form, opts)?;
    Ok(PairingResult { value, abs_error_estimate, convention: opts.convention, quadrature_evaluations, selection_trace: vec![trace] })
}

/// ⟨T, φ⟩ summed over all terms of the structure formula.
pub fn evaluate_terms(terms: &[CurrentTerm], form: &TestForm, opts: &EvalOptions) -> Result<PairingResult> {
    let parts: Vec<_> = terms
        .par_iter()
        .map(|t| {
            let ev = if form.components_for(&t.subset).next().is_some() { term_evaluator(t, opts)? } else { None };
            pair_with(t, ev.as_ref(), form, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut value = Complex64::new(0.0, 0.0);
    let mut abs_error_estimate = 0.0;
    let mut quadrature_evaluations = 0;
    let mut selection_trace = Vec::new();
    for (v, e, n, tr) in parts {
        value += v;
        abs_error_estimate += e;
        quadrature_evaluations += n;
        selection_trace.push(tr);
    }
    Ok(PairingResult { value, abs_error_estimate, convention: opts.convention, quadrature_evaluations, selection_trace })
}

pub fn evaluate_current(a: &ExponentMatrix, form: &TestForm, opts: &EvalOptions) -> Result<PairingResult> {
    form.check_degree(a.p(), a.n())?;
    let d = decompose(a)?;
    evaluate_terms(&d.terms, form, opts)
}
