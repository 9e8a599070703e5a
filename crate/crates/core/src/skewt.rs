//! Azzalini skewed Student-t law
//!
//! ```text
//! f(y) = (2/σ) t(z; ν) T(ξ z √((ν+1)/(ν+z²)); ν+1),   z = (y-μ)/σ
//! ```
//!
//! The distribution function has no closed form. Each law builds, on first
//! use, a table of cumulative panel integrals in the coordinate
//! `z = sinh(sinh(s))`, which compresses the polynomial tails into a short
//! interval of `s`. Beyond the table the tails follow the Student-t power
//! law scaled by the limiting skewing factor `2 T(±ξ√(ν+1); ν+1)`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::density::{check_level, PredictiveDensity};
use crate::error::{Error, Result};
use crate::quadrature::{gl8, Hint};
use crate::special::StudentT;

/// Smallest admissible scale.
pub const SIGMA_FLOOR: f64 = 1e-4;
/// Smallest admissible degrees of freedom.
pub const NU_FLOOR: f64 = 0.1;

const LN_2: f64 = std::f64::consts::LN_2;
const PANEL: f64 = 0.05;
const MAX_S: f64 = 6.0;
const TAIL_CUT: f64 = 1e-9;

/// One component's location, scale, shape and degrees of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewedTParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
    pub nu: f64,
}

impl SkewedTParams {
    /// Validates and applies the σ and ν floors.
    pub fn new(mu: f64, sigma: f64, xi: f64, nu: f64) -> Result<Self> {
        if !mu.is_finite() || !xi.is_finite() {
            return Err(Error::domain(format!("location and shape must be finite, got mu={mu}, xi={xi}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("scale must be finite and > 0, got {sigma}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::domain(format!("degrees of freedom must be finite and > 0, got {nu}")));
        }
        Ok(Self { mu, sigma: sigma.max(SIGMA_FLOOR), xi, nu: nu.max(NU_FLOOR) })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.mu, self.sigma, self.xi, self.nu).map(|_| ())
    }
}

#[inline]
fn to_z(s: f64) -> f64 {
    s.sinh().sinh()
}

#[inline]
fn dz_ds(s: f64) -> f64 {
    s.sinh().cosh() * s.cosh()
}

#[inline]
fn to_s(z: f64) -> f64 {
    z.asinh().asinh()
}

#[derive(Debug)]
struct CdfTable {
    s_lo: f64,
    cum: Vec<f64>,
    lower_tail: f64,
    total: f64,
    lower_factor: f64,
    upper_factor: f64,
}

/// A skewed-t law with cached constants and a lazily built CDF table.
#[derive(Debug)]
pub struct SkewT {
    params: SkewedTParams,
    t_nu: StudentT,
    t_nu1: StudentT,
    w_scale: f64,
    table: OnceLock<CdfTable>,
}

impl Clone for SkewT {
    fn clone(&self) -> Self {
        Self { params: self.params, t_nu: self.t_nu, t_nu1: self.t_nu1, w_scale: self.w_scale, table: OnceLock::new() }
    }
}

impl SkewT {
    pub fn new(params: SkewedTParams) -> Result<Self> {
        let p = SkewedTParams::new(params.mu, params.sigma, params.xi, params.nu)?;
        Ok(Self { params: p, t_nu: StudentT::new(p.nu)?, t_nu1: StudentT::new(p.nu + 1.0)?, w_scale: (p.nu + 1.0).sqrt(), table: OnceLock::new() })
    }

    pub fn params(&self) -> &SkewedTParams {
        &self.params
    }

    #[inline]
    fn skew_arg(&self, z: f64) -> f64 {
        self.params.xi * z * self.w_scale / (self.params.nu + z * z).sqrt()
    }

    /// Density of the standardized variable `z`.
    pub fn std_pdf(&self, z: f64) -> f64 {
        let w = self.skew_arg(z);
        2.0 * self.t_nu.pdf(z) * self.t_nu1.cdf(w)
    }

    /// Log-density of the standardized variable.
    pub fn std_ln_pdf(&self, z: f64) -> f64 {
        LN_2 + self.t_nu.ln_pdf(z) + self.t_nu1.ln_cdf(self.skew_arg(z))
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.std_pdf((y - self.params.mu) / self.params.sigma) / self.params.sigma
    }

    pub fn ln_pdf(&self, y: f64) -> f64 {
        self.std_ln_pdf((y - self.params.mu) / self.params.sigma) - self.params.sigma.ln()
    }

    fn integrand(&self, s: f64) -> f64 {
        self.std_pdf(to_z(s)) * dz_ds(s)
    }

    fn panel(&self, a: f64, b: f64) -> f64 {
        let (x, w) = gl8();
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * (0..8).map(|i| w[i] * self.integrand(mid + half * x[i])).sum::<f64>()
    }

    fn table(&self) -> &CdfTable {
        self.table.get_or_init(|| {
            let mut s_hi = PANEL;
            while s_hi < MAX_S && self.t_nu.sf(to_z(s_hi)) >= TAIL_CUT {
                s_hi += PANEL;
            }
            let n_side = (s_hi / PANEL).round() as usize;
            let s_lo = -(n_side as f64) * PANEL;
            let lower_factor = 2.0 * self.t_nu1.cdf(-self.params.xi * self.w_scale);
            let upper_factor = 2.0 * self.t_nu1.cdf(self.params.xi * self.w_scale);
            let lower_tail = lower_factor * self.t_nu.cdf(to_z(s_lo));
            let mut cum = Vec::with_capacity(2 * n_side + 1);
            let mut acc = lower_tail;
            cum.push(acc);
            for k in 0..2 * n_side {
                let a = s_lo + k as f64 * PANEL;
                acc += self.panel(a, a + PANEL).max(0.0);
                cum.push(acc);
            }
            let total = acc + upper_factor * self.t_nu.sf(to_z(-s_lo));
            CdfTable { s_lo, cum, lower_tail, total, lower_factor, upper_factor }
        })
    }

    /// Distribution function of the standardized variable.
    pub fn std_cdf(&self, z: f64) -> f64 {
        if z.is_nan() {
            return f64::NAN;
        }
        let tab = self.table();
        let s = to_s(z);
        let n_panels = tab.cum.len() - 1;
        let s_hi = tab.s_lo + n_panels as f64 * PANEL;
        let raw = if s <= tab.s_lo {
            tab.lower_factor * self.t_nu.cdf(z)
        } else if s >= s_hi {
            tab.total - tab.upper_factor * self.t_nu.sf(z)
        } else {
            let k = (((s - tab.s_lo) / PANEL).floor() as usize).min(n_panels - 1);
            let a = tab.s_lo + k as f64 * PANEL;
            tab.cum[k] + self.panel(a, s).clamp(0.0, tab.cum[k + 1] - tab.cum[k])
        };
        (raw / tab.total).clamp(0.0, 1.0)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.std_cdf((y - self.params.mu) / self.params.sigma)
    }

    /// Quantile of the standardized variable.
    pub fn std_quantile(&self, p: f64) -> Result<f64> {
        check_level(p)?;
        let tab = self.table();
        let target = p * tab.total;
        let n_panels = tab.cum.len() - 1;
        if target <= tab.lower_tail {
            return self.t_nu.quantile((target / tab.lower_factor).clamp(f64::MIN_POSITIVE, 0.5));
        }
        if target >= tab.cum[n_panels] {
            let upper = (tab.total - target) / tab.upper_factor;
            return Ok(-self.t_nu.quantile(upper.clamp(f64::MIN_POSITIVE, 0.5))?);
        }
        let k = tab.cum.partition_point(|c| *c <= target).clamp(1, n_panels) - 1;
        let base = tab.s_lo + k as f64 * PANEL;
        let need = target - tab.cum[k];
        let width = tab.cum[k + 1] - tab.cum[k];
        let (mut a, mut b) = (base, base + PANEL);
        let mut s = base + PANEL * (need / width).clamp(0.0, 1.0);
        for _ in 0..100 {
            let g = self.panel(base, s) - need;
            if g.abs() <= 1e-15 * tab.total {
                break;
            }
            if g > 0.0 {
                b = s;
            } else {
                a = s;
            }
            let d = self.integrand(s);
            let newton = s - g / d;
            s = if d > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a <= 1e-15 {
                break;
            }
        }
        Ok(to_z(s))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        Ok(self.params.mu + self.params.sigma * self.std_quantile(p)?)
    }
}

impl PredictiveDensity for SkewT {
    fn pdf(&self, y: f64) -> f64 {
        SkewT::pdf(self, y)
    }
    fn ln_pdf(&self, y: f64) -> f64 {
        SkewT::ln_pdf(self, y)
    }
    fn cdf(&self, y: f64) -> f64 {
        SkewT::cdf(self, y)
    }
    fn quantile(&self, p: f64) -> Result<f64> {
        SkewT::quantile(self, p)
    }
    fn hints(&self) -> Vec<Hint> {
        vec![Hint::new(self.params.mu, self.params.sigma)]
    }
}

/// Skewed-t density at `y`.
pub fn skewt_pdf(y: f64, p: &SkewedTParams) -> Result<f64> {
    Ok(SkewT::new(*p)?.pdf(y))
}

/// Skewed-t distribution function at `y`.
pub fn skewt_cdf(y: f64, p: &SkewedTParams) -> Result<f64> {
    Ok(SkewT::new(*p)?.cdf(y))
}

/// Skewed-t quantile at level `q`.
pub fn skewt_quantile(q: f64, p: &SkewedTParams) -> Result<f64> {
    SkewT::new(*p)?.quantile(q)
}
