//! Student-t density, distribution and quantile functions.
//!
//! The distribution function goes through the regularized incomplete beta
//! function, evaluated by its continued fraction (modified Lentz). Both
//! `x` and `1 - x` are passed explicitly so that the complement is never
//! formed by subtraction near the centre of the distribution.

use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

const LN_PI: f64 = 1.144_729_885_849_400_2;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 20_000;

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` given `x`, `y = 1 - x` and
/// `ln B(a, b)`.
pub fn beta_reg_with(a: f64, b: f64, x: f64, y: f64, ln_b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * y.ln() - ln_b;
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, y) / b
    }
}

/// `ln I_x(a, b)`, evaluated in log space where the continued fraction
/// applies directly so that values far below the `f64` range stay finite.
pub fn ln_beta_reg_with(a: f64, b: f64, x: f64, y: f64, ln_b: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if y <= 0.0 {
        return 0.0;
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        a * x.ln() + b * y.ln() - ln_b + (beta_cf(a, b, x) / a).ln()
    } else {
        beta_reg_with(a, b, x, y, ln_b).ln()
    }
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    beta_reg_with(a, b, x, 1.0 - x, ln_beta(a, b))
}

/// Standard Student-t law with `nu` degrees of freedom and its cached constants.
#[derive(Clone, Copy, Debug)]
pub struct StudentT {
    nu: f64,
    ln_norm: f64,
    ln_beta_half: f64,
}

impl StudentT {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::domain(format!("degrees of freedom must be finite and > 0, got {nu}")));
        }
        let ln_norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu.ln() + LN_PI);
        Ok(Self { nu, ln_norm, ln_beta_half: ln_beta(0.5 * nu, 0.5) })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        self.ln_norm - 0.5 * (self.nu + 1.0) * (z * z / self.nu).ln_1p()
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.ln_pdf(z).exp()
    }

    /// Lower tail probability `P(T <= -|z|)`, accurate for tiny values.
    fn lower_tail(&self, z: f64) -> f64 {
        let z2 = z * z;
        let denom = self.nu + z2;
        0.5 * beta_reg_with(0.5 * self.nu, 0.5, self.nu / denom, z2 / denom, self.ln_beta_half)
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z.is_nan() {
            return f64::NAN;
        }
        if z == f64::INFINITY {
            return 1.0;
        }
        if z == f64::NEG_INFINITY {
            return 0.0;
        }
        let tail = self.lower_tail(z);
        if z < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }

    /// Survival function `P(T > z)`.
    pub fn sf(&self, z: f64) -> f64 {
        self.cdf(-z)
    }

    /// `ln T(z)`, keeping precision deep in the lower tail.
    pub fn ln_cdf(&self, z: f64) -> f64 {
        if z < 0.0 {
            let z2 = z * z;
            let denom = self.nu + z2;
            std::f64::consts::LN_2.mul_add(-1.0, ln_beta_reg_with(0.5 * self.nu, 0.5, self.nu / denom, z2 / denom, self.ln_beta_half))
        } else {
            (-self.lower_tail(z)).ln_1p()
        }
    }

    /// Quantile by bisection on `u = asinh(asinh(z))`, polished by Newton steps.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::input(format!("quantile level must lie in (0, 1), got {p}")));
        }
        if p == 0.5 {
            return Ok(0.0);
        }
        let map = |u: f64| u.sinh().sinh();
        let (mut lo, mut hi) = (-7.2_f64, 7.2_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if self.cdf(map(mid)) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut z = map(0.5 * (lo + hi));
        for _ in 0..3 {
            let d = self.pdf(z);
            if !(d > 0.0) {
                break;
            }
            let step = (self.cdf(z) - p) / d;
            if !step.is_finite() || step.abs() > 1e-6 * (1.0 + z.abs()) {
                break;
            }
            z -= step;
        }
        Ok(z)
    }

    /// `d/dnu ln t(z; nu)` holding `z` fixed.
    pub fn d_ln_pdf_d_nu(&self, z: f64) -> f64 {
        let nu = self.nu;
        let z2 = z * z;
        0.5 * digamma(0.5 * (nu + 1.0)) - 0.5 * digamma(0.5 * nu) - 0.5 / nu - 0.5 * (z2 / nu).ln_1p() + 0.5 * (nu + 1.0) * z2 / (nu * (nu + z2))
    }
}

/// Standard Student-t density.
pub fn student_t_pdf(z: f64, nu: f64) -> Result<f64> {
    Ok(StudentT::new(nu)?.pdf(z))
}

/// Standard Student-t distribution function.
pub fn student_t_cdf(z: f64, nu: f64) -> Result<f64> {
    Ok(StudentT::new(nu)?.cdf(z))
}
