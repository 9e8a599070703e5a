//! Finite mixtures of skewed-t laws, the output of the network.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::density::{check_level, open_unit, PredictiveDensity};
use crate::error::{Error, Result};
use crate::quadrature::Hint;
use crate::rng;
use crate::skewt::{SkewT, SkewedTParams};

/// Mixture weights and component parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub components: Vec<SkewedTParams>,
}

impl MixtureParams {
    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::domain("mixture needs at least one component"));
        }
        if self.weights.len() != self.components.len() {
            return Err(Error::domain(format!("{} weights for {} components", self.weights.len(), self.components.len())));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::domain("mixture weights must be finite and nonnegative"));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-8 {
            return Err(Error::domain(format!("mixture weights sum to {sum}, not 1")));
        }
        self.components.iter().try_for_each(SkewedTParams::validate)
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }
}

/// A validated mixture ready for evaluation.
#[derive(Clone, Debug)]
pub struct Mixture {
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
    components: Vec<SkewT>,
}

impl Mixture {
    pub fn new(params: &MixtureParams) -> Result<Self> {
        params.validate()?;
        let components = params.components.iter().map(|c| SkewT::new(*c)).collect::<Result<Vec<_>>>()?;
        Ok(Self { weights: params.weights.clone(), ln_weights: params.weights.iter().map(|w| w.ln()).collect(), components })
    }

    pub fn params(&self) -> MixtureParams {
        MixtureParams { weights: self.weights.clone(), components: self.components.iter().map(|c| *c.params()).collect() }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[SkewT] {
        &self.components
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.weights.iter().zip(&self.components).map(|(w, c)| if *w > 0.0 { w * c.pdf(y) } else { 0.0 }).sum()
    }

    /// Log-density by log-sum-exp over components.
    pub fn ln_pdf(&self, y: f64) -> f64 {
        let terms: Vec<f64> =
            self.ln_weights.iter().zip(&self.components).map(|(lw, c)| if lw.is_finite() { lw + c.ln_pdf(y) } else { f64::NEG_INFINITY }).collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return m;
        }
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let c: f64 = self.weights.iter().zip(&self.components).map(|(w, c)| if *w > 0.0 { w * c.cdf(y) } else { 0.0 }).sum();
        c.clamp(0.0, 1.0)
    }

    /// Quantile by safeguarded Newton inside the bracket spanned by the
    /// component quantiles.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_level(p)?;
        let active: Vec<&SkewT> = self.weights.iter().zip(&self.components).filter(|(w, _)| **w > 0.0).map(|(_, c)| c).collect();
        if active.len() == 1 {
            return active[0].quantile(p);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &active {
            let q = c.quantile(p)?;
            lo = lo.min(q);
            hi = hi.max(q);
        }
        if hi <= lo {
            return Ok(lo);
        }
        let mut y = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = self.cdf(y) - p;
            if g.abs() < 1e-13 {
                return Ok(y);
            }
            if g > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let d = self.pdf(y);
            let newton = y - g / d;
            y = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * (1.0 + y.abs()) {
                break;
            }
        }
        Ok(y)
    }

    /// Component index for a uniform draw `u`.
    fn pick(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (j, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return j;
            }
        }
        self.weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    /// Categorical component draw, then inverse-CDF within the component.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = rng::from_seed(seed);
        (0..n)
            .map(|_| {
                let j = self.pick(rng.random());
                self.components[j].quantile(open_unit(&mut rng))
            })
            .collect()
    }
}

impl PredictiveDensity for Mixture {
    fn pdf(&self, y: f64) -> f64 {
        Mixture::pdf(self, y)
    }
    fn ln_pdf(&self, y: f64) -> f64 {
        Mixture::ln_pdf(self, y)
    }
    fn cdf(&self, y: f64) -> f64 {
        Mixture::cdf(self, y)
    }
    fn quantile(&self, p: f64) -> Result<f64> {
        Mixture::quantile(self, p)
    }
    fn hints(&self) -> Vec<Hint> {
        self.weights.iter().zip(&self.components).filter(|(w, _)| **w > 0.0).map(|(_, c)| Hint::new(c.params().mu, c.params().sigma)).collect()
    }
    fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        Mixture::sample(self, n, seed)
    }
}

pub fn mixture_pdf(m: &MixtureParams, y: f64) -> Result<f64> {
    Ok(Mixture::new(m)?.pdf(y))
}

pub fn mixture_logpdf(m: &MixtureParams, y: f64) -> Result<f64> {
    Ok(Mixture::new(m)?.ln_pdf(y))
}

pub fn mixture_cdf(m: &MixtureParams, y: f64) -> Result<f64> {
    Ok(Mixture::new(m)?.cdf(y))
}

pub fn mixture_quantile(m: &MixtureParams, p: f64) -> Result<f64> {
    Mixture::new(m)?.quantile(p)
}

pub fn mixture_sample(m: &MixtureParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    Mixture::new(m)?.sample(n, seed)
}

/// Truncated conditional moment `E[Y^k | q(p_lo) <= Y <= q(p_hi)]`.
pub fn mixture_moment(m: &MixtureParams, k: u32, trunc: (f64, f64)) -> Result<f64> {
    Mixture::new(m)?.moment(k, trunc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use proptest::prelude::*;
    use rand_distr::{ChiSquared, Distribution, StandardNormal};

    fn comp(mu: f64, sigma: f64, xi: f64, nu: f64) -> SkewedTParams {
        SkewedTParams::new(mu, sigma, xi, nu).unwrap()
    }

    fn mixture(weights: &[f64], comps: &[SkewedTParams]) -> Mixture {
        Mixture::new(&MixtureParams { weights: weights.to_vec(), components: comps.to_vec() }).unwrap()
    }

    /// Draws via the stochastic representation `Z0 / sqrt(V/ν)` with `Z0`
    /// skew-normal and `V ~ χ²_ν`.
    fn azzalini_draw(p: &SkewedTParams, rng: &mut rng::Rng) -> f64 {
        let delta = p.xi / (1.0 + p.xi * p.xi).sqrt();
        let u0: f64 = StandardNormal.sample(rng);
        let u1: f64 = StandardNormal.sample(rng);
        let z0 = delta * u0.abs() + (1.0 - delta * delta).sqrt() * u1;
        let v = ChiSquared::new(p.nu).unwrap().sample(rng);
        p.mu + p.sigma * z0 / (v / p.nu).sqrt()
    }

    #[test]
    fn single_component_reduces() {
        let c = comp(0.5, 1.3, 2.0, 3.0);
        let m = mixture(&[1.0], &[c]);
        let s = SkewT::new(c).unwrap();
        for y in [-4.0, 0.0, 0.5, 9.0] {
            assert_eq!(m.pdf(y), s.pdf(y));
            assert_eq!(m.cdf(y), s.cdf(y).clamp(0.0, 1.0));
            assert!((m.ln_pdf(y) - s.ln_pdf(y)).abs() < 1e-15);
        }
        assert_eq!(m.quantile(0.3).unwrap(), s.quantile(0.3).unwrap());
    }

    #[test]
    fn symmetric_pair() {
        let m = mixture(&[0.5, 0.5], &[comp(-2.0, 1.0, 0.0, 3.0), comp(2.0, 1.0, 0.0, 3.0)]);
        assert!((m.cdf(0.0) - 0.5).abs() < 1e-12);
        assert!(m.quantile(0.5).unwrap().abs() < 1e-9);
    }

    #[test]
    fn quantile_round_trip() {
        let m = mixture(&[0.2, 0.5, 0.3], &[comp(-3.0, 0.2, 4.0, 1.0), comp(0.0, 1.0, -1.0, 5.0), comp(6.0, 2.0, 0.0, 0.7)]);
        for i in 0..60 {
            let y = -8.0 + 0.3 * i as f64;
            let q = m.quantile(m.cdf(y)).unwrap();
            assert!((q - y).abs() < 1e-5, "y={y} q={q}");
        }
        assert!(m.quantile(1.0).is_err());
    }

    #[test]
    fn skewness_direction() {
        for xi in [0.5, 3.0] {
            let up = mixture(&[1.0], &[comp(1.0, 1.0, xi, 4.0)]);
            let down = mixture(&[1.0], &[comp(1.0, 1.0, -xi, 4.0)]);
            assert!(up.moment(1, (0.01, 0.99)).unwrap() > 1.0);
            assert!(down.moment(1, (0.01, 0.99)).unwrap() < 1.0);
        }
    }

    #[test]
    fn moments_simple_cases() {
        let m = mixture(&[1.0], &[comp(0.0, 1.0, 0.0, 2.0)]);
        assert!(m.moment(1, (0.001, 0.999)).unwrap().abs() < 1e-9);
        let spike = mixture(&[1.0], &[comp(3.0, 1e-4, 0.0, 30.0)]);
        assert!((spike.moment(2, (0.001, 0.999)).unwrap() - 9.0).abs() < 1e-3);
    }

    #[test]
    fn moment_matches_monte_carlo() {
        let comps = [comp(-1.0, 0.5, 2.0, 3.0), comp(2.0, 1.0, -1.0, 1.5)];
        let m = mixture(&[0.4, 0.6], &comps);
        let (lo, hi) = (m.quantile(0.01).unwrap(), m.quantile(0.99).unwrap());
        let mut rng = rng::from_seed(77);
        let mut kept = Vec::new();
        for _ in 0..1_000_000 {
            let j = if rng.random::<f64>() < 0.4 { 0 } else { 1 };
            let y = azzalini_draw(&comps[j], &mut rng);
            if y >= lo && y <= hi {
                kept.push(y);
            }
        }
        let n = kept.len() as f64;
        let mean = kept.iter().sum::<f64>() / n;
        let sd = (kept.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let quad = m.moment(1, (0.01, 0.99)).unwrap();
        assert!((quad - mean).abs() < 3.0 * sd / n.sqrt(), "quad {quad} mc {mean}");
    }

    #[test]
    fn sampler_matches_stochastic_representation() {
        let c = comp(0.5, 2.0, -3.0, 2.5);
        let m = mixture(&[1.0], &[c]);
        let ours = m.sample(100_000, 3).unwrap();
        let mut rng = rng::from_seed(4);
        let theirs: Vec<f64> = (0..100_000).map(|_| azzalini_draw(&c, &mut rng)).collect();
        assert!(crate::stats::ks_two_sample(&ours, &theirs).unwrap() < 0.01);
        assert_eq!(ours[..10], m.sample(10, 3).unwrap()[..]);
    }

    #[test]
    fn rejects_bad_weights() {
        let c = comp(0.0, 1.0, 0.0, 1.0);
        assert!(Mixture::new(&MixtureParams { weights: vec![0.5, 0.6], components: vec![c, c] }).is_err());
        assert!(Mixture::new(&MixtureParams { weights: vec![], components: vec![] }).is_err());
        assert!(Mixture::new(&MixtureParams { weights: vec![1.0], components: vec![c, c] }).is_err());
        assert!(Mixture::new(&MixtureParams { weights: vec![1.5, -0.5], components: vec![c, c] }).is_err());
    }

    #[test]
    fn json_layout() {
        let p = MixtureParams { weights: vec![1.0], components: vec![comp(0.0, 1.0, 0.5, 4.0)] };
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        assert_eq!(v["components"][0]["xi"], 0.5);
        assert_eq!(v["weights"][0], 1.0);
    }

    fn arb_mixture() -> impl Strategy<Value = MixtureParams> {
        prop::collection::vec((0.01f64..1.0, -5.0f64..5.0, 0.05f64..3.0, -4.0f64..4.0, 0.5f64..30.0), 1..5).prop_map(|v| {
            let total: f64 = v.iter().map(|c| c.0).sum();
            MixtureParams { weights: v.iter().map(|c| c.0 / total).collect(), components: v.iter().map(|c| comp(c.1, c.2, c.3, c.4)).collect() }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn normalizes(p in arb_mixture()) {
            let m = Mixture::new(&p).unwrap();
            let mass = integrate(|y| m.pdf(y), &m.hints(), f64::NEG_INFINITY, f64::INFINITY);
            prop_assert!((mass - 1.0).abs() < 1e-3, "mass {}", mass);
        }

        #[test]
        fn cdf_is_monotone(p in arb_mixture()) {
            let m = Mixture::new(&p).unwrap();
            let mut prev = 0.0;
            for i in 0..400 {
                let c = m.cdf(-20.0 + 0.1 * i as f64);
                prop_assert!(c >= prev - 1e-12);
                prev = c;
            }
        }

        #[test]
        fn ln_pdf_consistent(p in arb_mixture(), y in -50.0f64..50.0) {
            let m = Mixture::new(&p).unwrap();
            let d = m.pdf(y);
            if d > 1e-300 {
                prop_assert!((m.ln_pdf(y).exp() / d - 1.0).abs() < 1e-10);
            }
        }
    }
}
