//! The predictive-density interface shared by forecasters and the scoring code.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::quadrature::{self, Hint};
use crate::rng;

/// An evaluable conditional law of the forecast target.
pub trait PredictiveDensity: Send + Sync {
    fn pdf(&self, y: f64) -> f64;

    fn ln_pdf(&self, y: f64) -> f64 {
        self.pdf(y).ln()
    }

    fn cdf(&self, y: f64) -> f64;

    fn quantile(&self, p: f64) -> Result<f64>;

    /// Locations and scales where the density has structure; drives quadrature.
    fn hints(&self) -> Vec<Hint>;

    /// Inverse-CDF draws.
    fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = rng::from_seed(seed);
        (0..n).map(|_| self.quantile(open_unit(&mut rng))).collect()
    }

    /// Truncated moment `E[Y^k | q(p_lo) <= Y <= q(p_hi)]` by quadrature.
    fn moment(&self, k: u32, trunc: (f64, f64)) -> Result<f64> {
        check_moment_args(k, trunc)?;
        let lo = self.quantile(trunc.0)?;
        let hi = self.quantile(trunc.1)?;
        let hints = self.hints();
        let mass = quadrature::integrate(|y| self.pdf(y), &hints, lo, hi);
        if !(mass > 0.0) {
            return Err(Error::numeric(None, "truncated mass vanished"));
        }
        Ok(quadrature::integrate(|y| y.powi(k as i32) * self.pdf(y), &hints, lo, hi) / mass)
    }
}

/// Uniform draw on the open interval `(0, 1)`.
pub fn open_unit(rng: &mut rng::Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub(crate) fn check_moment_args(k: u32, trunc: (f64, f64)) -> Result<()> {
    if !(1..=4).contains(&k) {
        return Err(Error::input(format!("moment order must be in 1..=4, got {k}")));
    }
    let (lo, hi) = trunc;
    if !(lo > 0.0 && lo < hi && hi < 1.0) {
        return Err(Error::input(format!("truncation must satisfy 0 < p_lo < p_hi < 1, got ({lo}, {hi})")));
    }
    Ok(())
}

pub(crate) fn check_level(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::input(format!("probability level must lie in (0, 1), got {p}")))
    }
}

/// Cumulative panel integrals of a density over an adaptive partition.
///
/// Holds no reference to the density; callers pass it back on every query.
#[derive(Clone, Debug)]
pub struct NumericCdf {
    breaks: Vec<f64>,
    cum: Vec<f64>,
}

impl NumericCdf {
    pub fn build<F: Fn(f64) -> f64>(pdf: F, hints: &[Hint]) -> Self {
        let breaks = quadrature::partition(hints, f64::NEG_INFINITY, f64::INFINITY);
        Self::from_breaks(pdf, breaks)
    }

    pub fn from_breaks<F: Fn(f64) -> f64>(pdf: F, breaks: Vec<f64>) -> Self {
        let mut cum = Vec::with_capacity(breaks.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for ab in breaks.windows(2) {
            acc += quadrature::panel(&pdf, ab[0], ab[1]).max(0.0);
            cum.push(acc);
        }
        Self { breaks, cum }
    }

    /// Total mass captured by the table.
    pub fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    fn locate(&self, y: f64) -> usize {
        self.breaks.partition_point(|b| *b <= y).saturating_sub(1).min(self.breaks.len() - 2)
    }

    /// Normalized distribution function.
    pub fn cdf<F: Fn(f64) -> f64>(&self, pdf: F, y: f64) -> f64 {
        let total = self.total();
        if !(total > 0.0) || y.is_nan() {
            return f64::NAN;
        }
        if y <= self.breaks[0] {
            return 0.0;
        }
        if y >= *self.breaks.last().unwrap() {
            return 1.0;
        }
        let k = self.locate(y);
        let partial = quadrature::panel(&pdf, self.breaks[k], y).clamp(0.0, self.cum[k + 1] - self.cum[k]);
        ((self.cum[k] + partial) / total).clamp(0.0, 1.0)
    }

    /// Quantile by table search then safeguarded Newton inside the panel.
    pub fn quantile<F: Fn(f64) -> f64>(&self, pdf: F, p: f64) -> Result<f64> {
        check_level(p)?;
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::numeric(None, "empty cumulative table"));
        }
        let target = p * total;
        let k = self.cum.partition_point(|c| *c <= target).clamp(1, self.cum.len() - 1) - 1;
        let (mut a, mut b) = (self.breaks[k], self.breaks[k + 1]);
        let base = self.cum[k];
        let width = self.cum[k + 1] - base;
        let need = target - base;
        let mut y = a + (b - a) * (need / width).clamp(0.0, 1.0);
        for _ in 0..100 {
            let g = quadrature::panel(&pdf, self.breaks[k], y) - need;
            if g.abs() <= 1e-14 * total {
                break;
            }
            if g > 0.0 {
                b = y;
            } else {
                a = y;
            }
            let d = pdf(y);
            let newton = y - g / d;
            y = if d > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a <= 1e-15 * (1.0 + y.abs()) {
                break;
            }
        }
        Ok(y)
    }
}

/// Indices of strict local maxima of `values` whose height is at least
/// `min_rel` times the global maximum. Flat tops count once.
pub fn local_modes(values: &[f64], min_rel: f64) -> Vec<usize> {
    let n = values.len();
    let top = values.iter().cloned().fold(0.0_f64, f64::max);
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let left_lower = i == 0 || values[i - 1] < values[i];
        let right_lower = j + 1 == n || values[j + 1] < values[j];
        let interior = i > 0 || j + 1 < n;
        if left_lower && right_lower && interior && values[i] >= min_rel * top && values[i] > 0.0 {
            out.push((i + j) / 2);
        }
        i = j + 1;
    }
    out
}

/// `n` equispaced points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    struct Logistic;

    impl PredictiveDensity for Logistic {
        fn pdf(&self, y: f64) -> f64 {
            let e = (-y.abs()).exp();
            e / ((1.0 + e) * (1.0 + e))
        }
        fn cdf(&self, y: f64) -> f64 {
            1.0 / (1.0 + (-y).exp())
        }
        fn quantile(&self, p: f64) -> Result<f64> {
            check_level(p)?;
            Ok((p / (1.0 - p)).ln())
        }
        fn hints(&self) -> Vec<Hint> {
            vec![Hint::new(0.0, 1.0)]
        }
    }

    #[test]
    fn default_moment_is_conditional() {
        let m1 = Logistic.moment(1, (0.01, 0.99)).unwrap();
        assert!(m1.abs() < 1e-10);
        let m2 = Logistic.moment(2, (0.25, 0.75)).unwrap();
        let q = 3.0_f64.ln();
        assert!(m2 > 0.0 && m2 < q * q);
        assert!(Logistic.moment(5, (0.1, 0.9)).is_err());
        assert!(Logistic.moment(1, (0.9, 0.1)).is_err());
    }

    #[test]
    fn numeric_cdf_matches_closed_form() {
        let pdf = |y: f64| 1.0 / (PI * (1.0 + y * y));
        let table = NumericCdf::build(pdf, &[Hint::new(0.0, 1.0)]);
        for y in [-50.0_f64, -1.0, 0.0, 0.3, 7.0] {
            let exact = 0.5 + y.atan() / PI;
            assert!((table.cdf(pdf, y) - exact).abs() < 1e-9, "y={y}");
        }
        for p in [0.001, 0.2, 0.5, 0.97] {
            let q = table.quantile(pdf, p).unwrap();
            assert!((q - (PI * (p - 0.5)).tan()).abs() < 1e-6 * (1.0 + q.abs()), "p={p}");
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let a = Logistic.sample(100, 3).unwrap();
        let b = Logistic.sample(100, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Logistic.sample(100, 4).unwrap());
    }

    #[test]
    fn modes_found() {
        let x = linspace(-5.0, 5.0, 1001);
        let v: Vec<f64> = x.iter().map(|x| (-(x - 2.0f64).powi(2)).exp() + 0.5 * (-(x + 2.0f64).powi(2)).exp()).collect();
        let m = local_modes(&v, 0.01);
        assert_eq!(m.len(), 2);
        assert!((x[m[0]] + 2.0).abs() < 0.02 && (x[m[1]] - 2.0).abs() < 0.02);
        assert_eq!(local_modes(&[0.0, 1.0, 1.0, 0.0], 0.01), vec![1]);
        assert!(local_modes(&v, 0.6).len() == 1);
    }

    #[test]
    fn linspace_ends() {
        let g = linspace(-1.0, 2.0, 4);
        assert_eq!(g, vec![-1.0, 0.0, 1.0, 2.0]);
    }
}
