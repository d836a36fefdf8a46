//! The structure formula: one symbolic term per index set with Δ_I ≠ 0 and
//! q(I) ≥ 1, built from the cone report and the exact inverse of A_I.
//!
//! A term reads
//!
//! ```text
//! c_I · ⋀_{j∈J} ∂̄[1/ζ_j^{|α^j|}] ∧ ⋀_{k∈I\J} 1/(ζ_k^{|α^k|} ζ̄_k) ∧ ⋀_{l∉I} [1/ζ_l^{|α^l|}] · F
//! ```
//!
//! where F is a Mellin–Barnes integral over the p − q free directions.

use std::fmt::Write as _;

use num::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::cone::{cone_report, ConeReport, Vanishing};
use crate::error::{Error, Result};
use crate::linalg::{self, index_data, rational_serde, ExponentMatrix, IndexData, Subset, Q};

/// `(-1)^{|I| - p(p+1)/2 + (n-p+1)(n-p)/2}` with |I| the coordinate sum of I.
pub fn sign_constant(subset: &Subset, p: usize, n: usize) -> i32 {
    let exponent = subset.coordinate_sum() as i64 - (p * (p + 1) / 2) as i64
        + ((n - p + 1) * (n - p) / 2) as i64;
    if exponent.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbarFactor {
    pub var: usize,
    pub power: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjPvFactor {
    pub var: usize,
    pub power: u32,
    pub conj_power: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PvFactor {
    pub var: usize,
    pub power: u32,
}

/// One `(variable, exponent)` pair inside a Mellin–Barnes power base.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub var: usize,
    #[serde(with = "rational_serde")]
    pub exponent: Q,
}

/// Data of the Mellin–Barnes factor
/// `(2πi)^{-d} ∫_{iR^d} ∏_l Γ(1 − Σ_j c_{lj} λ_j) ∏_j x_j^{λ_j} dλ`.
///
/// Variables in `power_exponents` are 1-based. Each base is
/// `x_j = ∏ |ζ_var|^{2·exponent}` over its list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MbSpec {
    pub dim: usize,
    /// One row per Gamma factor, `dim` coefficients each.
    pub gamma_rows: Vec<RationalRow>,
    /// One list per integration variable.
    pub power_exponents: Vec<Vec<PowerTerm>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RationalRow(#[serde(with = "rational_serde::vec")] pub Vec<Q>);

impl MbSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_rows.iter().any(|r| r.0.len() != self.dim) {
            return Err(Error::InvalidInput("gamma row length differs from dim".into()));
        }
        if self.power_exponents.len() != self.dim {
            return Err(Error::InvalidInput("power_exponents length differs from dim".into()));
        }
        Ok(())
    }

    pub fn gamma_rows_f64(&self) -> Vec<Vec<f64>> {
        self.gamma_rows.iter().map(|r| r.0.iter().map(linalg::q_to_f64).collect()).collect()
    }

    /// Log of every base from the squared radii `t[var-1] = |ζ_var|²`.
    pub fn log_bases(&self, log_t: &[f64]) -> Vec<f64> {
        self.power_exponents
            .iter()
            .map(|terms| terms.iter().map(|pt| linalg::q_to_f64(&pt.exponent) * log_t[pt.var - 1]).sum())
            .collect()
    }

    /// Variables (1-based) on which at least one base depends.
    pub fn coupled_vars(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .power_exponents
            .iter()
            .flatten()
            .filter(|pt| !pt.exponent.is_zero())
            .map(|pt| pt.var)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// One summand of the structure formula.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurrentTerm {
    #[serde(rename = "I")]
    pub subset: Subset,
    #[serde(rename = "J")]
    pub j: Subset,
    pub n: usize,
    /// c_I.
    pub sign: i32,
    /// Sign of Δ_I: the orientation of the change of variables s → λ_I.
    pub orientation: i32,
    pub dbar_factors: Vec<DbarFactor>,
    pub conj_pv_factors: Vec<ConjPvFactor>,
    pub pv_factors: Vec<PvFactor>,
    pub mb: Option<MbSpec>,
    pub prefactor_exponent: usize,
}

impl CurrentTerm {
    pub fn p(&self) -> usize {
        self.subset.len()
    }

    pub fn q(&self) -> usize {
        self.j.len()
    }

    /// `c_I · sign(Δ_I)`, the sign the term actually carries.
    pub fn effective_sign(&self) -> i32 {
        self.sign * self.orientation
    }

    /// Machine check of the factor partition and the bookkeeping invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidInput(format!("term {}: {m}", self.subset)));
        let mut seen: Vec<usize> = self
            .dbar_factors
            .iter()
            .map(|f| f.var)
            .chain(self.conj_pv_factors.iter().map(|f| f.var))
            .chain(self.pv_factors.iter().map(|f| f.var))
            .collect();
        seen.sort_unstable();
        if seen != (1..=self.n).collect::<Vec<_>>() {
            return fail(format!("factor variables {seen:?} do not partition 1..={}", self.n));
        }
        let (p, q) = (self.p(), self.q());
        if self.dbar_factors.len() != q || self.conj_pv_factors.len() != p - q || self.pv_factors.len() != self.n - p {
            return fail("factor family sizes do not match (q, p − q, n − p)".into());
        }
        if self.dbar_factors.iter().map(|f| f.var - 1).collect::<Vec<_>>() != self.j.indices() {
            return fail("∂̄ variables differ from J".into());
        }
        if self.sign != sign_constant(&self.subset, p, self.n) {
            return fail("sign constant mismatch".into());
        }
        if self.prefactor_exponent != p - q {
            return fail("prefactor exponent must equal p − q".into());
        }
        match (&self.mb, q < p) {
            (Some(mb), true) if mb.dim == p - q => {
                mb.validate()?;
                // Every Gamma argument equals 1 at λ = 0 by construction;
                // rows must therefore be finite rationals of the right width.
                if mb.gamma_rows.len() != p {
                    return fail("expected p Gamma rows".into());
                }
                Ok(())
            }
            (None, false) => Ok(()),
            _ => fail("Mellin–Barnes data present iff q < p, with dim p − q".into()),
        }
    }

    /// Variables (1-based) F depends on: all but J.
    pub fn f_arguments(&self) -> Vec<usize> {
        (1..=self.n).filter(|v| !self.j.contains(v - 1)).collect()
    }
}

/// A subset left out of the formula, with the reason.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedSubset {
    #[serde(rename = "I")]
    pub subset: Subset,
    pub reason: Vanishing,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub terms: Vec<CurrentTerm>,
    pub skipped: Vec<SkippedSubset>,
}

/// Build the term for one nondegenerate subset with q ≥ 1.
pub fn build_term(a: &ExponentMatrix, data: &IndexData, report: &ConeReport) -> CurrentTerm {
    let (p, n) = (a.p(), a.n());
    let sums = a.column_sums();
    let subset = &data.subset;
    let j = &report.j;
    let inv = data.inverse_rows.as_ref().expect("nondegenerate subset");

    let dbar_factors = j.indices().iter().map(|&v| DbarFactor { var: v + 1, power: sums[v] }).collect();
    let active: Vec<usize> = subset.indices().iter().copied().filter(|&v| !j.contains(v)).collect();
    let conj_pv_factors =
        active.iter().map(|&v| ConjPvFactor { var: v + 1, power: sums[v], conj_power: 1 }).collect();
    let outside = subset.complement(n);
    let pv_factors = outside.iter().map(|&v| PvFactor { var: v + 1, power: sums[v] }).collect();

    let mb = if active.is_empty() {
        None
    } else {
        let positions: Vec<usize> = active.iter().map(|&v| subset.position(v).unwrap()).collect();
        let gamma_rows =
            (0..p).map(|l| RationalRow(positions.iter().map(|&pos| inv[pos][l].clone()).collect())).collect();
        let power_exponents = active
            .iter()
            .zip(&positions)
            .map(|(&v, &pos)| {
                let mut terms = vec![PowerTerm { var: v + 1, exponent: Q::one() }];
                for &k in &outside {
                    let mu = data.mu_of(k).expect("μ for every k ∉ I");
                    terms.push(PowerTerm { var: k + 1, exponent: mu[pos].clone() });
                }
                terms
            })
            .collect();
        Some(MbSpec { dim: active.len(), gamma_rows, power_exponents })
    };

    CurrentTerm {
        subset: subset.clone(),
        j: j.clone(),
        n,
        sign: sign_constant(subset, p, n),
        orientation: data.delta_sign(),
        dbar_factors,
        conj_pv_factors,
        pv_factors,
        mb,
        prefactor_exponent: p - report.q,
    }
}

/// All terms of the structure formula for `a`, sorted by I.
pub fn decompose(a: &ExponentMatrix) -> Result<Decomposition> {
    let mut terms = Vec::new();
    let mut skipped = Vec::new();
    for subset in linalg::subsets(a.n(), a.p()) {
        let data = index_data(a, &subset)?;
        let report = cone_report(a, &data)?;
        match report.vanishing {
            Vanishing::None => terms.push(build_term(a, &data, &report)),
            reason => skipped.push(SkippedSubset { subset, reason }),
        }
    }
    Ok(Decomposition { terms, skipped })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderFormat {
    Text,
    Structured,
}

fn sign_str(s: i32) -> &'static str {
    if s < 0 {
        "−"
    } else {
        "+"
    }
}

/// Human-readable formula of one term.
pub fn render_text(term: &CurrentTerm) -> String {
    let mut pieces: Vec<String> = Vec::new();
    for f in &term.dbar_factors {
        pieces.push(format!("∂̄[1/ζ{}^{}]", f.var, f.power));
    }
    for f in &term.conj_pv_factors {
        let conj = if f.conj_power == 1 { format!("ζ̄{}", f.var) } else { format!("ζ̄{}^{}", f.var, f.conj_power) };
        pieces.push(format!("(1/(ζ{}^{} {}))", f.var, f.power, conj));
    }
    for f in &term.pv_factors {
        pieces.push(format!("[1/ζ{}^{}]", f.var, f.power));
    }
    let mut out = format!("{} {}", sign_str(term.effective_sign()), pieces.join(" ∧ "));
    if term.mb.is_some() {
        let args: Vec<String> = term.f_arguments().iter().map(|v| format!("|ζ{v}|²")).collect();
        let _ = write!(out, " · F({})", args.join(","));
    }
    out
}

/// Structured document as a JSON value with alphabetically ordered keys.
pub fn render_structured(term: &CurrentTerm) -> serde_json::Value {
    serde_json::to_value(term).expect("terms always serialize")
}

pub fn render(term: &CurrentTerm, format: RenderFormat) -> String {
    match format {
        RenderFormat::Text => render_text(term),
        RenderFormat::Structured => {
            serde_json::to_string(&render_structured(term)).expect("terms always serialize")
        }
    }
}

pub fn parse_structured(doc: &str) -> Result<CurrentTerm> {
    serde_json::from_str(doc).map_err(|e| Error::InvalidInput(format!("term document: {e}")))
}
