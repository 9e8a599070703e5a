//! α-stable innovations.
//!
//! Parameterization is the classical S1 form `S(α, β, σ, μ)` with
//! characteristic function
//!
//! ```text
//! ln E[e^{iuX}] = -σ^α |u|^α (1 - iβ sign(u) tan(πα/2)) + iμu     (α ≠ 1)
//! ln E[e^{iuX}] = -σ|u| (1 + iβ (2/π) sign(u) ln|u|) + iμu        (α = 1)
//! ```
//!
//! so that `α = 2` is `N(μ, 2σ²)` and `(α, β) = (1, 0)` is Cauchy with scale σ.
//! In S1, μ is not a location parameter when `α = 1, β ≠ 0`; scaling then
//! also shifts by `(2/π)βσ ln σ`. Draws use the Chambers–Mallows–Stuck
//! construction.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Parameters `(α, β, σ, μ)` of a stable law in S1 form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub mu: f64,
}

impl StableParams {
    pub fn new(alpha: f64, beta: f64, sigma: f64, mu: f64) -> Result<Self> {
        let p = Self { alpha, beta, sigma, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 2], got {}", self.alpha)));
        }
        if !(-1.0..=1.0).contains(&self.beta) {
            return Err(Error::domain(format!("beta must lie in [-1, 1], got {}", self.beta)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be finite and > 0, got {}", self.sigma)));
        }
        if !self.mu.is_finite() {
            return Err(Error::domain(format!("mu must be finite, got {}", self.mu)));
        }
        Ok(())
    }

    /// One draw from the law using `rng`.
    pub fn draw(&self, rng: &mut Rng) -> f64 {
        let v = PI * (rng.random::<f64>() - 0.5);
        let w: f64 = Exp1.sample(rng);
        let (a, b) = (self.alpha, self.beta);
        if a == 1.0 {
            let half_pi_bv = FRAC_PI_2 + b * v;
            let x = (half_pi_bv * v.tan() - b * ((FRAC_PI_2 * w * v.cos()) / half_pi_bv).ln()) / FRAC_PI_2;
            self.sigma * x + b * self.sigma * self.sigma.ln() / FRAC_PI_2 + self.mu
        } else {
            let zeta = b * (PI * a / 2.0).tan();
            let shift = zeta.atan() / a;
            let scale = (1.0 + zeta * zeta).powf(1.0 / (2.0 * a));
            let x = scale * (a * (v + shift)).sin() / v.cos().powf(1.0 / a) * ((v - a * (v + shift)).cos() / w).powf((1.0 - a) / a);
            self.sigma * x + self.mu
        }
    }
}

/// `n` i.i.d. draws from `params`; identical seeds give identical output.
pub fn sample_stable(params: &StableParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    if n == 0 {
        return Err(Error::input("sample size must be at least 1"));
    }
    let mut rng = rng::from_seed(seed);
    Ok((0..n).map(|_| params.draw(&mut rng)).collect())
}

/// Cauchy density with the given location and scale.
pub fn cauchy_pdf(x: f64, location: f64, scale: f64) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(Error::domain(format!("Cauchy scale must be > 0, got {scale}")));
    }
    let d = x - location;
    Ok(scale / (PI * (scale * scale + d * d)))
}

/// Cauchy distribution function.
pub fn cauchy_cdf(x: f64, location: f64, scale: f64) -> f64 {
    0.5 + ((x - location) / scale).atan() / PI
}
