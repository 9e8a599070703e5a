//! Exact predictive law of a Cauchy MAR(0,1) process.
//!
//! For `X_t = ψ X_{t+1} + ε_t` with `ε_t ~ Cauchy(0, σ)` iid and `|ψ| < 1`,
//! forward substitution gives
//! `X_t = ψ^h X_{t+h} + Σ_{j<h} ψ^j ε_{t+j}`. The sum involves only
//! innovations dated `t … t+h-1`, which are independent of `X_{t+h}` (a
//! function of `ε_{t+h}, ε_{t+h+1}, …`), and by stability it is
//! `Cauchy(0, s_h)` with `s_h = σ Σ_{j<h} |ψ|^j`. The marginal is
//! `Cauchy(0, s_∞)` with `s_∞ = σ / (1 - |ψ|)`. Bayes' rule then yields
//!
//! `p(y | x) = C(x; ψ^h y, s_h) C(y; 0, s_∞) / C(x; 0, s_∞)`.
//!
//! Conditioning on `X_t` alone loses nothing: `X_{t-1} = ψ X_t + ε_{t-1}`
//! adds only `ε_{t-1}`, independent of `(X_t, X_{t+h})`, and likewise for
//! earlier lags, so `X_{t+h}` given the whole past depends on `X_t` only.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::density::{NumericCdf, PredictiveDensity};
use crate::error::{Error, Result};
use crate::marma::MarmaSpec;
use crate::quadrature::Hint;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CauchyMar1Oracle {
    pub psi: f64,
    pub sigma: f64,
    pub horizon: usize,
}

#[inline]
fn cauchy(x: f64, loc: f64, scale: f64) -> f64 {
    let d = (x - loc) / scale;
    1.0 / (PI * scale * (1.0 + d * d))
}

impl CauchyMar1Oracle {
    pub fn new(psi: f64, sigma: f64, horizon: usize) -> Result<Self> {
        if !(psi.abs() > 0.0 && psi.abs() < 1.0) {
            return Err(Error::domain(format!("oracle needs 0 < |psi| < 1, got {psi}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("innovation scale must be finite and > 0, got {sigma}")));
        }
        if horizon == 0 {
            return Err(Error::domain("horizon must be at least 1"));
        }
        Ok(Self { psi, sigma, horizon })
    }

    /// The oracle of a purely noncausal order-one spec with symmetric
    /// centered Cauchy noise.
    pub fn from_spec(spec: &MarmaSpec, horizon: usize) -> Result<Self> {
        let n = &spec.noise;
        if spec.psi.len() != 1 || !spec.phi.is_empty() || !spec.theta.is_empty() || !spec.eta.is_empty() {
            return Err(Error::input("closed-form oracle only covers MAR(0,1)"));
        }
        if n.alpha != 1.0 || n.beta != 0.0 || n.mu != 0.0 {
            return Err(Error::input("closed-form oracle needs symmetric centered Cauchy noise"));
        }
        Self::new(spec.psi[0], n.sigma, horizon)
    }

    /// Scale of the marginal law.
    pub fn marginal_scale(&self) -> f64 {
        self.sigma / (1.0 - self.psi.abs())
    }

    /// Scale of the aggregated innovations over the horizon.
    pub fn horizon_scale(&self) -> f64 {
        let a = self.psi.abs();
        self.sigma * (1.0 - a.powi(self.horizon as i32)) / (1.0 - a)
    }

    pub fn marginal_pdf(&self, y: f64) -> f64 {
        cauchy(y, 0.0, self.marginal_scale())
    }

    /// Marginal quantile, used to place conditioning values.
    pub fn marginal_quantile(&self, p: f64) -> f64 {
        self.marginal_scale() * (PI * (p - 0.5)).tan()
    }
}

/// `p(· | X_t = x)` from the oracle.
#[derive(Debug)]
pub struct CauchyPredictive {
    x: f64,
    lead: f64,
    s_h: f64,
    s_inf: f64,
    ln_norm: f64,
    table: OnceLock<NumericCdf>,
}

impl Clone for CauchyPredictive {
    fn clone(&self) -> Self {
        Self { table: OnceLock::new(), ..*self }
    }
}

pub fn cauchy_predictive(oracle: &CauchyMar1Oracle, x: f64) -> Result<CauchyPredictive> {
    if !x.is_finite() {
        return Err(Error::input("conditioning value must be finite"));
    }
    let s_inf = oracle.marginal_scale();
    Ok(CauchyPredictive {
        x,
        lead: oracle.psi.powi(oracle.horizon as i32),
        s_h: oracle.horizon_scale(),
        s_inf,
        ln_norm: -cauchy(x, 0.0, s_inf).ln(),
        table: OnceLock::new(),
    })
}

impl CauchyPredictive {
    fn table(&self) -> &NumericCdf {
        self.table.get_or_init(|| NumericCdf::build(|y| self.pdf(y), &self.hints()))
    }

    /// Location of the continuation mode, `x / ψ^h`.
    pub fn continuation(&self) -> f64 {
        self.x / self.lead
    }
}

impl PredictiveDensity for CauchyPredictive {
    fn pdf(&self, y: f64) -> f64 {
        (cauchy(self.x, self.lead * y, self.s_h).ln() + cauchy(y, 0.0, self.s_inf).ln() + self.ln_norm).exp()
    }

    fn cdf(&self, y: f64) -> f64 {
        self.table().cdf(|v| self.pdf(v), y)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        self.table().quantile(|v| self.pdf(v), p)
    }

    fn hints(&self) -> Vec<Hint> {
        vec![Hint::new(0.0, self.s_inf), Hint::new(self.continuation(), self.s_h / self.lead.abs())]
    }
}

/// Truncated conditional moment `E[Y^k | q(p_lo) ≤ Y ≤ q(p_hi), X_t = x]`.
pub fn oracle_moment(oracle: &CauchyMar1Oracle, x: f64, k: u32, trunc: (f64, f64)) -> Result<f64> {
    cauchy_predictive(oracle, x)?.moment(k, trunc)
}
