//! Exact analysis of the cone K^I = {x : ⟨α^k, x⟩ ≥ 0, k ∈ I} cut by the
//! half-space {x_1 + … + x_p ≤ 0}.
//!
//! Feasibility is decided by Fourier–Motzkin elimination over the
//! rationals, with strictness tracked through every combination.

use num::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, q, rank, ExponentMatrix, IndexData, Subset, Q};

/// `coeffs · x ≥ rhs`, or `>` when `strict`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inequality {
    pub coeffs: Vec<Q>,
    pub rhs: Q,
    pub strict: bool,
}

impl Inequality {
    pub fn homogeneous(coeffs: Vec<Q>) -> Self {
        Inequality { coeffs, rhs: Q::zero(), strict: false }
    }

    pub fn holds_at(&self, x: &[Q]) -> bool {
        let lhs = linalg::dot(&self.coeffs, x);
        if self.strict {
            lhs > self.rhs
        } else {
            lhs >= self.rhs
        }
    }

    /// Divide through by the magnitude of the leading nonzero coefficient so
    /// equal constraints compare equal.
    fn normalized(mut self) -> Self {
        let scale = self
            .coeffs
            .iter()
            .find(|c| !c.is_zero())
            .map(|c| c.abs())
            .or_else(|| if self.rhs.is_zero() { None } else { Some(self.rhs.abs()) });
        if let Some(s) = scale {
            for c in self.coeffs.iter_mut() {
                *c /= &s;
            }
            self.rhs /= &s;
        }
        self
    }

    fn is_trivial(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Truth value of a constraint with no variables left.
    fn trivially_true(&self) -> bool {
        let zero = Q::zero();
        if self.strict {
            zero > self.rhs
        } else {
            zero >= self.rhs
        }
    }
}

/// Keep the strongest constraint per coefficient vector.
fn dedupe(mut system: Vec<Inequality>) -> Vec<Inequality> {
    system.sort_by(|a, b| a.coeffs.cmp(&b.coeffs));
    let mut out: Vec<Inequality> = Vec::with_capacity(system.len());
    for c in system {
        match out.last_mut() {
            Some(last) if last.coeffs == c.coeffs => {
                if c.rhs > last.rhs || (c.rhs == last.rhs && c.strict) {
                    *last = c;
                }
            }
            _ => out.push(c),
        }
    }
    out
}

fn eliminate(system: &[Inequality], var: usize) -> Vec<Inequality> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut keep = Vec::new();
    for c in system {
        let a = &c.coeffs[var];
        if a.is_positive() {
            lower.push(c);
        } else if a.is_negative() {
            upper.push(c);
        } else {
            keep.push(c.clone());
        }
    }
    for l in &lower {
        for u in &upper {
            let wl = -u.coeffs[var].clone();
            let wu = l.coeffs[var].clone();
            let coeffs: Vec<Q> =
                l.coeffs.iter().zip(&u.coeffs).map(|(a, b)| &wl * a + &wu * b).collect();
            let rhs = &wl * &l.rhs + &wu * &u.rhs;
            keep.push(Inequality { coeffs, rhs, strict: l.strict || u.strict }.normalized());
        }
    }
    dedupe(keep)
}

/// Simple value inside an interval with optional (possibly strict) bounds:
/// the integer nearest zero when there is one, else the midpoint.
fn pick(lo: Option<(Q, bool)>, hi: Option<(Q, bool)>) -> Q {
    let ok = |x: &Q| {
        lo.as_ref().map_or(true, |(l, s)| if *s { x > l } else { x >= l })
            && hi.as_ref().map_or(true, |(h, s)| if *s { x < h } else { x <= h })
    };
    let zero = Q::zero();
    if ok(&zero) {
        return zero;
    }
    let candidate = match (&lo, &hi) {
        (Some((l, s)), _) if l >= &zero => {
            let mut c = l.ceil();
            if *s && c == *l {
                c += q(1);
            }
            c
        }
        (_, Some((h, s))) => {
            let mut c = h.floor();
            if *s && c == *h {
                c -= q(1);
            }
            c
        }
        (Some((l, _)), None) => l.ceil() + q(1),
        (None, None) => zero.clone(),
    };
    if ok(&candidate) {
        return candidate;
    }
    match (lo, hi) {
        (Some((l, _)), Some((h, _))) => (l + h) / q(2),
        (Some((l, _)), None) => l + q(1),
        (None, Some((h, _))) => h - q(1),
        (None, None) => Q::zero(),
    }
}

/// Decide feasibility of a rational system and produce a witness.
pub fn feasible(system: &[Inequality]) -> Option<Vec<Q>> {
    let dim = system.first().map_or(0, |c| c.coeffs.len());
    let mut stages = vec![dedupe(system.iter().cloned().map(Inequality::normalized).collect())];
    for var in (0..dim).rev() {
        let next = eliminate(stages.last().unwrap(), var);
        stages.push(next);
    }
    if !stages.last().unwrap().iter().all(|c| c.is_trivial() && c.trivially_true()) {
        return None;
    }
    // stages[dim - v] involves only x_0..=x_v (after eliminating x_{v+1}..).
    let mut x: Vec<Q> = Vec::with_capacity(dim);
    for v in 0..dim {
        let stage = &stages[dim - 1 - v];
        let mut lo: Option<(Q, bool)> = None;
        let mut hi: Option<(Q, bool)> = None;
        for c in stage {
            let a = &c.coeffs[v];
            if a.is_zero() {
                continue;
            }
            let rest = (0..v).fold(Q::zero(), |acc, i| acc + &c.coeffs[i] * &x[i]);
            let bound = (&c.rhs - rest) / a;
            if a.is_positive() {
                let tighter = match &lo {
                    None => true,
                    Some((l, s)) => bound > *l || (bound == *l && c.strict && !s),
                };
                if tighter {
                    lo = Some((bound, c.strict));
                }
            } else {
                let tighter = match &hi {
                    None => true,
                    Some((h, s)) => bound < *h || (bound == *h && c.strict && !s),
                };
                if tighter {
                    hi = Some((bound, c.strict));
                }
            }
        }
        x.push(pick(lo, hi));
    }
    debug_assert!(system.iter().all(|c| c.holds_at(&x)));
    Some(x)
}

/// Is there a point satisfying every constraint with constraint
/// `strict_index` holding strictly?
pub fn strict_feasible(constraints: &[Inequality], strict_index: usize) -> (bool, Option<Vec<Q>>) {
    if constraints.is_empty() {
        return (true, Some(Vec::new()));
    }
    let mut sys = constraints.to_vec();
    sys[strict_index].strict = true;
    match feasible(&sys) {
        Some(w) => (true, Some(w)),
        None => (false, None),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vanishing {
    None,
    ZeroMinor,
    QZero,
}

/// Classification of one index set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    #[serde(rename = "I")]
    pub subset: Subset,
    pub q: usize,
    #[serde(rename = "J")]
    pub j: Subset,
    pub vanishing: Vanishing,
    #[serde(with = "opt_rational_vec")]
    pub witness: Option<Vec<Q>>,
}

mod opt_rational_vec {
    use super::*;
    use serde::{Deserializer, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(v: &Option<Vec<Q>>, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.as_ref().map(|w| w.iter().map(|x| x.to_string()).collect::<Vec<_>>()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<Q>>, D::Error> {
        let raw = Option::<Vec<String>>::deserialize(d)?;
        raw.map(|w| {
            w.iter()
                .map(|r| Q::from_str(r).map_err(|_| serde::de::Error::custom(format!("bad rational {r:?}"))))
                .collect()
        })
        .transpose()
    }
}

/// Verdict of the implicit-equality analysis for a system of cone normals
/// (indexed like the subset) plus the half-space normal.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    /// Positions (into the normal list) of implicit equalities.
    pub implicit: Vec<usize>,
    /// Whether Σx < 0 is attainable; witness included.
    pub interior_witness: Option<Vec<Q>>,
}

/// Classify the system `{⟨n_i, x⟩ ≥ 0} ∪ {⟨h, x⟩ ≥ 0}` where `h` is
/// the (possibly rescaled) half-space normal, a positive multiple of −(1,…,1).
pub fn classify(normals: &[Vec<Q>], half_space: &[Q]) -> Classification {
    let mut system: Vec<Inequality> = normals.iter().cloned().map(Inequality::homogeneous).collect();
    system.push(Inequality::homogeneous(half_space.to_vec()));
    let half = system.len() - 1;
    let (interior, witness) = strict_feasible(&system, half);
    if interior {
        return Classification { implicit: Vec::new(), interior_witness: witness };
    }
    let implicit = (0..normals.len()).filter(|&i| !strict_feasible(&system, i).0).collect();
    Classification { implicit, interior_witness: None }
}

/// Lexicographically smallest sub-family of `candidates` of size `r` whose
/// vectors have rank `r`.
fn smallest_independent(vectors: &[Vec<Q>], candidates: &[usize], r: usize) -> Vec<usize> {
    fn rec(vs: &[Vec<Q>], cand: &[usize], r: usize, start: usize, cur: &mut Vec<usize>) -> bool {
        if cur.len() == r {
            let fam: Vec<Vec<Q>> = cur.iter().map(|&i| vs[i].clone()).collect();
            return rank(&fam) == r;
        }
        for i in start..cand.len() {
            cur.push(cand[i]);
            if rec(vs, cand, r, i + 1, cur) {
                return true;
            }
            cur.pop();
        }
        false
    }
    let mut cur = Vec::new();
    rec(vectors, candidates, r, 0, &mut cur);
    cur
}

pub fn cone_report(a: &ExponentMatrix, data: &IndexData) -> Result<ConeReport> {
    let subset = data.subset.clone();
    if data.is_degenerate() {
        return Ok(ConeReport {
            subset,
            q: 0,
            j: Subset::from_zero_based(Vec::new()),
            vanishing: Vanishing::ZeroMinor,
            witness: None,
        });
    }
    let p = a.p();
    let normals: Vec<Vec<Q>> = subset.indices().iter().map(|&k| a.column_q(k)).collect();
    let half: Vec<Q> = vec![q(-1); p];
    let class = classify(&normals, &half);
    if let Some(w) = class.interior_witness {
        return Ok(ConeReport {
            subset,
            q: 0,
            j: Subset::from_zero_based(Vec::new()),
            vanishing: Vanishing::QZero,
            witness: Some(w),
        });
    }
    let implicit_vectors: Vec<Vec<Q>> = class.implicit.iter().map(|&i| normals[i].clone()).collect();
    let q_rank = rank(&implicit_vectors);
    let chosen = if class.implicit.len() > q_rank {
        smallest_independent(&normals, &class.implicit, q_rank)
    } else {
        class.implicit.clone()
    };
    let chosen_vectors: Vec<Vec<Q>> = chosen.iter().map(|&i| normals[i].clone()).collect();
    let ones = vec![q(1); p];
    if q_rank == 0 || !linalg::in_span(&chosen_vectors, &ones) {
        return Err(Error::StructuralAssumption {
            subset: subset.to_string(),
            detail: "(1,…,1) is not in the span of the implicit-equality normals, so the \
                     face K_0^I is not cut out by the cone constraints alone"
                .into(),
        });
    }
    let j = Subset::from_zero_based(chosen.iter().map(|&i| subset.indices()[i]).collect());
    Ok(ConeReport { subset, q: q_rank, j, vanishing: Vanishing::None, witness: None })
}
