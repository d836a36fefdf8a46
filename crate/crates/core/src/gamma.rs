//! Complex Gamma function (Lanczos, g = 7, nine terms) with reflection.

use std::f64::consts::PI;

use num::complex::Complex64;

const G: f64 = 7.0;
const COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn ln_gamma_right(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut x = Complex64::new(COEFFS[0], 0.0);
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// A logarithm of sin(πz), stable for large |Im z|. The branch is arbitrary.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    if z.im > 5.0 {
        -i * PI * z + Complex64::new(-(2.0f64).ln(), PI / 2.0) + (1.0 - (2.0 * i * PI * z).exp()).ln()
    } else if z.im < -5.0 {
        i * PI * z + Complex64::new(-(2.0f64).ln(), -PI / 2.0) + (1.0 - (-2.0 * i * PI * z).exp()).ln()
    } else {
        (PI * z).sin().ln()
    }
}

/// ln Γ(z) up to a multiple of 2πi. Not defined at the poles.
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        PI.ln() - ln_sin_pi(z) - ln_gamma_right(1.0 - z)
    } else {
        ln_gamma_right(z)
    }
}

pub fn gamma(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    let g = ln_gamma(z).exp();
    if z.im == 0.0 {
        Complex64::new(g.re, 0.0)
    } else {
        g
    }
}

pub fn gamma_real(x: f64) -> f64 {
    gamma(Complex64::new(x, 0.0)).re
}

/// |Γ(1 + iw)| = sqrt(πw / sinh(πw)).
pub fn abs_gamma_one_plus_i(w: f64) -> f64 {
    let w = w.abs();
    if w < 1e-8 {
        return 1.0;
    }
    let x = PI * w;
    if x > 700.0 {
        return (0.5 * (2.0 * x).ln() - 0.5 * x).exp();
    }
    (x / x.sinh()).sqrt()
}
