//! Radial profiles g(t), t = |ζ|², for separable test forms.

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};

/// Number of Taylor coefficients kept at t = 0.
pub const TAYLOR_ORDER: usize = 48;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialProfile {
    /// exp(−t/(R² − t)) on [0, R²).
    Bump {
        #[serde(rename = "R")]
        radius: f64,
    },
    /// Identically 1 for |ζ| ≤ flat, smooth step down to 0 at |ζ| = R.
    Plateau {
        #[serde(rename = "R")]
        radius: f64,
        flat: f64,
    },
    /// Smooth bump on the annulus inner < |ζ| < R, zero near the origin.
    Shell {
        #[serde(rename = "R")]
        radius: f64,
        inner: f64,
    },
}

fn smooth_step(x: f64) -> f64 {
    // 0 for x ≤ 0, 1 for x ≥ 1.
    let psi = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    let (u, v) = (psi(x), psi(1.0 - x));
    if u + v == 0.0 {
        0.0
    } else {
        u / (u + v)
    }
}

impl RadialProfile {
    pub fn bump(radius: f64) -> Self {
        RadialProfile::Bump { radius }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadialProfile::Bump { radius } => radius.is_finite() && radius > 0.0,
            RadialProfile::Plateau { radius, flat } => radius.is_finite() && flat > 0.0 && flat < radius,
            RadialProfile::Shell { radius, inner } => radius.is_finite() && inner > 0.0 && inner < radius,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidTestForm(format!("bad profile parameters {self:?}")))
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            RadialProfile::Bump { radius } | RadialProfile::Plateau { radius, .. } | RadialProfile::Shell { radius, .. } => radius,
        }
    }

    /// R²: g vanishes for t ≥ support_end.
    pub fn support_end(&self) -> f64 {
        self.radius() * self.radius()
    }

    /// Largest t0 with g ≡ 0 on [0, t0], if any.
    pub fn vanishing_below(&self) -> Option<f64> {
        match *self {
            RadialProfile::Shell { inner, .. } => Some(inner * inner),
            _ => None,
        }
    }

    pub fn value_at_zero(&self) -> f64 {
        match self {
            RadialProfile::Shell { .. } => 0.0,
            _ => 1.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let r2 = self.support_end();
        if t >= r2 {
            return 0.0;
        }
        match *self {
            RadialProfile::Bump { .. } => (-t / (r2 - t)).exp(),
            RadialProfile::Plateau { flat, .. } => {
                let f2 = flat * flat;
                if t <= f2 {
                    1.0
                } else {
                    smooth_step((r2 - t) / (r2 - f2))
                }
            }
            RadialProfile::Shell { inner, .. } => {
                let i2 = inner * inner;
                if t <= i2 {
                    return 0.0;
                }
                let w = r2 - i2;
                (1.0 - w * w / (4.0 * (t - i2) * (r2 - t))).exp()
            }
        }
    }

    /// Taylor coefficients g_k of g at t = 0, k < TAYLOR_ORDER.
    pub fn taylor(&self) -> Vec<f64> {
        let mut c = vec![0.0; TAYLOR_ORDER];
        match *self {
            RadialProfile::Bump { .. } => {
                // g = exp(h), h(t) = −Σ_{k≥1} (t/R²)^k.
                let r2 = self.support_end();
                let h: Vec<f64> = (0..TAYLOR_ORDER).map(|k| if k == 0 { 0.0 } else { -r2.powi(-(k as i32)) }).collect();
                c[0] = 1.0;
                for m in 1..TAYLOR_ORDER {
                    let s: f64 = (1..=m).map(|k| k as f64 * h[k] * c[m - k]).sum();
                    c[m] = s / m as f64;
                }
            }
            RadialProfile::Plateau { .. } => c[0] = 1.0,
            RadialProfile::Shell { .. } => {}
        }
        c
    }

    /// ∫_0^{R²} t^b g(t) dt for a nonnegative integer b.
    pub fn moment(&self, b: u32, opts: &QuadOptions) -> (f64, f64, usize) {
        let lo = self.vanishing_below().unwrap_or(0.0);
        let r = integrate(|t: f64| t.powi(b as i32) * self.eval(t), lo, self.support_end(), opts);
        (r.value, r.error, r.evaluations)
    }

    /// Mellin transform M(z) = ∫_0^{R²} t^z g(t) dt, continued meromorphically
    /// to all z. Poles sit at z = −1 − k where g_k ≠ 0.
    ///
    /// On [0, c] the Taylor series of g is integrated term by term, which is
    /// the continuation; the remainder [c, R²] is an entire function of z.
    pub fn mellin(&self, z: Complex64, opts: &QuadOptions) -> Result<(Complex64, f64)> {
        let r2 = self.support_end();
        let (c, series): (f64, Vec<f64>) = match *self {
            RadialProfile::Bump { .. } => (0.25 * r2, self.taylor()),
            RadialProfile::Plateau { flat, .. } => (flat * flat, vec![1.0]),
            RadialProfile::Shell { inner, .. } => (inner * inner, Vec::new()),
        };
        let mut total = Complex64::new(0.0, 0.0);
        let ln_c = c.ln();
        for (k, gk) in series.iter().enumerate() {
            if *gk == 0.0 {
                continue;
            }
            let e = z + (k + 1) as f64;
            if e.norm() < 1e-14 {
                return Err(Error::NonintegrableParameters(format!("Mellin pole at z = {z}")));
            }
            total += *gk * (e * ln_c).exp() / e;
        }
        let r = integrate(
            |t: f64| (z * t.ln()).exp() * self.eval(t),
            c,
            r2,
            &QuadOptions { initial_panels: 8, ..*opts },
        );
        if !r.converged {
            return Err(Error::QuadratureNonconvergent(format!("Mellin transform at z = {z}")));
        }
        total += r.value;
        Ok((total, r.error))
    }
}
