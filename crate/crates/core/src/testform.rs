//! Separable test forms φ = Σ_I φ_I dζ ∧ dζ̄[I] with
//! φ_I(ζ) = w ∏_m g_m(|ζ_m|²) ζ_m^{a_m} ζ̄_m^{b_m}.
//!
//! A component index may repeat; its coefficient is then the sum of the
//! listed separable terms.

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Subset;
use crate::profile::RadialProfile;

pub const MAX_DEGREE: u32 = 16;

/// One separable coefficient on all n variables.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableCoefficient {
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub profiles: Vec<RadialProfile>,
}

impl SeparableCoefficient {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn uniform(a: Vec<u32>, b: Vec<u32>, profile: RadialProfile) -> Self {
        let n = a.len();
        SeparableCoefficient { a, b, profiles: vec![profile; n] }
    }

    /// Largest support radius among the variables.
    pub fn max_radius(&self) -> f64 {
        self.profiles.iter().map(RadialProfile::radius).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub subset: Subset,
    pub weight: Complex64,
    pub coeff: SeparableCoefficient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTestForm", into = "RawTestForm")]
pub struct TestForm {
    pub n: usize,
    pub components: Vec<Component>,
}

impl TestForm {
    pub fn new(n: usize, mut components: Vec<Component>) -> Result<Self> {
        for c in &components {
            validate_component(n, c)?;
        }
        components.sort_by(|x, y| x.subset.cmp(&y.subset));
        Ok(TestForm { n, components })
    }

    pub fn single(subset: Subset, coeff: SeparableCoefficient) -> Result<Self> {
        let n = coeff.n();
        TestForm::new(n, vec![Component { subset, weight: Complex64::new(1.0, 0.0), coeff }])
    }

    pub fn components_for<'a>(&'a self, subset: &'a Subset) -> impl Iterator<Item = &'a Component> + 'a {
        self.components.iter().filter(move |c| &c.subset == subset)
    }

    /// Every component index must have p elements.
    pub fn check_degree(&self, p: usize, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::InvalidTestForm(format!("test form has n = {}, matrix has n = {n}", self.n)));
        }
        if let Some(c) = self.components.iter().find(|c| c.subset.len() != p) {
            return Err(Error::InvalidTestForm(format!("component {} is not a {p}-subset", c.subset)));
        }
        Ok(())
    }

    /// `αφ₁ + βφ₂` as a test form with concatenated components.
    pub fn combine(&self, alpha: Complex64, other: &TestForm, beta: Complex64) -> Result<TestForm> {
        if self.n != other.n {
            return Err(Error::InvalidTestForm("dimension mismatch".into()));
        }
        let scaled = |f: &TestForm, s: Complex64| {
            f.components.iter().map(move |c| Component { weight: c.weight * s, ..c.clone() }).collect::<Vec<_>>()
        };
        let mut comps = scaled(self, alpha);
        comps.extend(scaled(other, beta));
        TestForm::new(self.n, comps)
    }

    /// max R^{2·max row degree}, the natural scale of ‖f‖² on the support.
    pub fn natural_scale(&self, max_row_degree: u32) -> f64 {
        let r = self.components.iter().map(|c| c.coeff.max_radius()).fold(0.0, f64::max);
        if r == 0.0 {
            1.0
        } else {
            r.powi(2 * max_row_degree as i32)
        }
    }
}

fn validate_component(n: usize, c: &Component) -> Result<()> {
    let k = &c.coeff;
    if k.a.len() != n || k.b.len() != n || k.profiles.len() != n {
        return Err(Error::InvalidTestForm(format!("component {} needs {n} degrees and profiles", c.subset)));
    }
    if k.a.iter().chain(&k.b).any(|&d| d > MAX_DEGREE) {
        return Err(Error::InvalidTestForm(format!("degrees above {MAX_DEGREE}")));
    }
    if !c.weight.re.is_finite() || !c.weight.im.is_finite() {
        return Err(Error::InvalidTestForm("non-finite weight".into()));
    }
    if c.subset.indices().iter().any(|&i| i >= n) {
        return Err(Error::MalformedIndex(format!("{} out of range 1..={n}", c.subset)));
    }
    k.profiles.iter().try_for_each(RadialProfile::validate)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTestForm {
    n: usize,
    components: Vec<RawComponent>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawWeight {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    #[serde(rename = "I")]
    subset: Vec<usize>,
    a: Vec<u32>,
    b: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profile: Option<RadialProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profiles: Option<Vec<RadialProfile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<RawWeight>,
}

impl TryFrom<RawTestForm> for TestForm {
    type Error = Error;

    fn try_from(raw: RawTestForm) -> Result<Self> {
        let n = raw.n;
        let comps = raw
            .components
            .into_iter()
            .map(|rc| {
                let subset = Subset::from_one_based(&rc.subset, n)?;
                let profiles = match (rc.profile, rc.profiles) {
                    (Some(p), None) => vec![p; n],
                    (None, Some(ps)) => ps,
                    _ => return Err(Error::InvalidTestForm("give exactly one of `profile` or `profiles`".into())),
                };
                let weight = match rc.weight {
                    None => Complex64::new(1.0, 0.0),
                    Some(RawWeight::Real(w)) => Complex64::new(w, 0.0),
                    Some(RawWeight::Complex([re, im])) => Complex64::new(re, im),
                };
                Ok(Component { subset, weight, coeff: SeparableCoefficient { a: rc.a, b: rc.b, profiles } })
            })
            .collect::<Result<Vec<_>>>()?;
        TestForm::new(n, comps)
    }
}

impl From<TestForm> for RawTestForm {
    fn from(f: TestForm) -> Self {
        RawTestForm {
            n: f.n,
            components: f
                .components
                .into_iter()
                .map(|c| RawComponent {
                    subset: c.subset.one_based(),
                    a: c.coeff.a,
                    b: c.coeff.b,
                    profile: None,
                    profiles: Some(c.coeff.profiles),
                    weight: Some(RawWeight::Complex([c.weight.re, c.weight.im])),
                })
                .collect(),
        }
    }
}

pub fn parse_testform(doc: &str) -> Result<TestForm> {
    serde_json::from_str(doc).map_err(|e| Error::InvalidTestForm(e.to_string()))
}
