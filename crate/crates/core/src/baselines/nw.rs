//! Nadaraya–Watson conditional density with Gaussian kernels.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::density::{check_level, PredictiveDensity};
use crate::error::{Error, Result};
use crate::quadrature::Hint;
use crate::stats;

/// Neighbours used when every conditioning kernel underflows.
pub const FALLBACK_NEIGHBOURS: usize = 50;
const KERNEL_REACH: f64 = 40.0;
const MAX_HINTS: usize = 256;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `1.06 ŝ n^{-1/5}` with `ŝ` the IQR-based scale, falling back to the
/// standard deviation and then to 1 on degenerate samples.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let mut s = stats::robust_scale(values)?;
    if !(s > 0.0) {
        s = stats::variance(values).sqrt();
    }
    if !(s > 0.0 && s.is_finite()) {
        s = 1.0;
    }
    Ok(1.06 * s * (values.len() as f64).powf(-0.2))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NwEstimator {
    /// Conditioning values, ascending.
    xs: Vec<f64>,
    ys: Vec<f64>,
    pub bandwidth_x: f64,
    pub bandwidth_y: f64,
}

impl NwEstimator {
    /// Bandwidths by Silverman's rule on each axis.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::State("kernel estimator needs training pairs".into()));
        }
        let hx = silverman_bandwidth(xs)?;
        let hy = silverman_bandwidth(ys)?;
        Self::with_bandwidths(xs, ys, hx, hy)
    }

    pub fn with_bandwidths(xs: &[f64], ys: &[f64], bandwidth_x: f64, bandwidth_y: f64) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::State("kernel estimator needs training pairs".into()));
        }
        if xs.len() != ys.len() {
            return Err(Error::input("conditioning values and targets differ in length"));
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(Error::input("training pairs must be finite"));
        }
        for h in [bandwidth_x, bandwidth_y] {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::domain(format!("bandwidth must be finite and > 0, got {h}")));
            }
        }
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|a, b| xs[*a].total_cmp(&xs[*b]));
        Ok(Self { xs: idx.iter().map(|i| xs[*i]).collect(), ys: idx.iter().map(|i| ys[*i]).collect(), bandwidth_x, bandwidth_y })
    }

    /// Pairs `(X_t, X_{t+h})` from a series.
    pub fn from_series(series: &[f64], horizon: usize) -> Result<Self> {
        if horizon == 0 || series.len() <= horizon {
            return Err(Error::input("series too short for the horizon"));
        }
        let n = series.len() - horizon;
        Self::fit(&series[..n], &series[horizon..])
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Conditional density at conditioning value `x`.
    pub fn density(&self, x: f64) -> Result<NwDensity> {
        nw_density(self, x)
    }
}

/// A finite Gaussian mixture in `y` with kernel weights from the conditioning axis.
#[derive(Clone, Debug)]
pub struct NwDensity {
    /// Component centers, ascending.
    centers: Vec<f64>,
    weights: Vec<f64>,
    /// `cum[i]` is the total weight of components before `i`.
    cum: Vec<f64>,
    bandwidth: f64,
    fallback: bool,
}

/// `Σ K(x - X_i) K(y - Y_i) / Σ K(x - X_i)`; when the denominator underflows
/// the nearest [`FALLBACK_NEIGHBOURS`] conditioning points get equal weight.
pub fn nw_density(est: &NwEstimator, x: f64) -> Result<NwDensity> {
    if !x.is_finite() {
        return Err(Error::input("conditioning value must be finite"));
    }
    if est.is_empty() {
        return Err(Error::State("kernel estimator needs training pairs".into()));
    }
    let h = est.bandwidth_x;
    let lo = est.xs.partition_point(|v| *v < x - KERNEL_REACH * h);
    let hi = est.xs.partition_point(|v| *v <= x + KERNEL_REACH * h);
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(hi - lo);
    let mut denom = 0.0;
    for i in lo..hi {
        let u = (x - est.xs[i]) / h;
        let k = (-0.5 * u * u).exp() * FRAC_1_SQRT_2PI / h;
        if k > 0.0 {
            pairs.push((est.ys[i], k));
            denom += k;
        }
    }
    let fallback = !(denom >= 1e-300);
    if fallback {
        pairs = nearest(est, x, FALLBACK_NEIGHBOURS).into_iter().map(|i| (est.ys[i], 1.0)).collect();
        denom = pairs.len() as f64;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let centers: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let weights: Vec<f64> = pairs.iter().map(|p| p.1 / denom).collect();
    let mut cum = Vec::with_capacity(weights.len() + 1);
    let mut acc = 0.0;
    cum.push(0.0);
    for w in &weights {
        acc += w;
        cum.push(acc);
    }
    Ok(NwDensity { centers, weights, cum, bandwidth: est.bandwidth_y, fallback })
}

fn nearest(est: &NwEstimator, x: f64, k: usize) -> Vec<usize> {
    let n = est.len();
    let mut right = est.xs.partition_point(|v| *v < x);
    let mut left = right;
    let mut out = Vec::with_capacity(k.min(n));
    while out.len() < k.min(n) {
        let take_left = right >= n || (left > 0 && x - est.xs[left - 1] <= est.xs[right] - x);
        if take_left {
            left -= 1;
            out.push(left);
        } else {
            out.push(right);
            right += 1;
        }
    }
    out
}

impl NwDensity {
    /// Whether the nearest-neighbour fallback was used.
    pub fn is_fallback(&self) -> bool {
        self.fallback
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n_components(&self) -> usize {
        self.centers.len()
    }

    fn window(&self, y: f64) -> (usize, usize) {
        let r = KERNEL_REACH * self.bandwidth;
        (self.centers.partition_point(|c| *c < y - r), self.centers.partition_point(|c| *c <= y + r))
    }
}

impl PredictiveDensity for NwDensity {
    fn pdf(&self, y: f64) -> f64 {
        let (lo, hi) = self.window(y);
        let h = self.bandwidth;
        let s: f64 = (lo..hi)
            .map(|i| {
                let u = (y - self.centers[i]) / h;
                self.weights[i] * (-0.5 * u * u).exp()
            })
            .sum();
        s * FRAC_1_SQRT_2PI / h
    }

    fn cdf(&self, y: f64) -> f64 {
        if y.is_nan() {
            return f64::NAN;
        }
        let (lo, hi) = self.window(y);
        let inside: f64 = (lo..hi).map(|i| self.weights[i] * 0.5 * erfc(-(y - self.centers[i]) / (self.bandwidth * std::f64::consts::SQRT_2))).sum();
        (self.cum[lo] + inside).clamp(0.0, 1.0)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        check_level(p)?;
        let r = KERNEL_REACH * self.bandwidth;
        let (mut a, mut b) = (self.centers[0] - r, self.centers[self.centers.len() - 1] + r);
        let mut y = self.centers[self.cum.partition_point(|c| *c < p).clamp(1, self.centers.len()) - 1];
        for _ in 0..200 {
            let g = self.cdf(y) - p;
            if g.abs() < 1e-15 {
                break;
            }
            if g > 0.0 {
                b = y;
            } else {
                a = y;
            }
            let d = self.pdf(y);
            let newton = y - g / d;
            y = if d > 0.0 && newton >= a && newton <= b { newton } else { 0.5 * (a + b) };
            if b - a <= 1e-14 * (1.0 + y.abs()) {
                break;
            }
        }
        Ok(y)
    }

    /// One hint per cluster of overlapping kernels, heaviest first.
    fn hints(&self) -> Vec<Hint> {
        let h = self.bandwidth;
        let mut clusters: Vec<(f64, f64, f64)> = Vec::new(); // (weight, first, last)
        for (c, w) in self.centers.iter().zip(&self.weights) {
            match clusters.last_mut() {
                Some(last) if *c - last.2 <= 3.0 * h => {
                    last.0 += w;
                    last.2 = *c;
                }
                _ => clusters.push((*w, *c, *c)),
            }
        }
        clusters.sort_by(|a, b| b.0.total_cmp(&a.0));
        clusters.truncate(MAX_HINTS);
        clusters
            .iter()
            .flat_map(|(_, a, b)| {
                let mut hs = vec![Hint::new(*a, h)];
                if b > a {
                    hs.push(Hint::new(*b, h));
                    hs.push(Hint::new(0.5 * (a + b), (0.25 * (b - a)).max(h)));
                }
                hs
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::rng;
    use rand::Rng as _;

    #[test]
    fn single_pair_is_one_kernel() {
        let est = NwEstimator::with_bandwidths(&[1.5], &[-2.0], 0.3, 0.7).unwrap();
        let d = est.density(1.5).unwrap();
        for y in [-4.0, -2.0, 0.0, 1.0] {
            let u: f64 = (y + 2.0) / 0.7;
            let want = (-0.5 * u * u).exp() / (0.7 * (2.0 * std::f64::consts::PI).sqrt());
            assert!((d.pdf(y) - want).abs() < 1e-15);
        }
        assert!(!d.is_fallback());
    }

    #[test]
    fn normalized() {
        let mut r = rng::from_seed(3);
        let xs: Vec<f64> = (0..500).map(|_| r.random::<f64>() * 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin() * 5.0 + r.random::<f64>()).collect();
        let est = NwEstimator::fit(&xs, &ys).unwrap();
        for x in [0.5, 5.0, 9.7] {
            let d = est.density(x).unwrap();
            let total = integrate(|y| d.pdf(y), &d.hints(), f64::NEG_INFINITY, f64::INFINITY);
            assert!((total - 1.0).abs() < 1e-6, "{total}");
            for p in [0.01, 0.5, 0.93] {
                assert!((d.cdf(d.quantile(p).unwrap()) - p).abs() < 1e-10);
            }
            let y = 1.3;
            let by_quad = integrate(|v| d.pdf(v), &d.hints(), f64::NEG_INFINITY, y);
            assert!((by_quad - d.cdf(y)).abs() < 1e-8);
        }
    }

    #[test]
    fn translation_equivariant() {
        let mut r = rng::from_seed(4);
        let xs: Vec<f64> = (0..300).map(|_| r.random::<f64>()).collect();
        let ys: Vec<f64> = (0..300).map(|_| r.random::<f64>()).collect();
        let c = 7.25;
        let a = NwEstimator::with_bandwidths(&xs, &ys, 0.1, 0.2).unwrap();
        let xs2: Vec<f64> = xs.iter().map(|v| v + c).collect();
        let ys2: Vec<f64> = ys.iter().map(|v| v + c).collect();
        let b = NwEstimator::with_bandwidths(&xs2, &ys2, 0.1, 0.2).unwrap();
        let (da, db) = (a.density(0.4).unwrap(), b.density(0.4 + c).unwrap());
        for y in [-0.5, 0.1, 0.5, 0.9] {
            assert!((da.pdf(y) - db.pdf(y + c)).abs() < 1e-12 * da.pdf(y).max(1.0));
        }
    }

    #[test]
    fn quantiles_monotone_with_distant_clusters() {
        let xs = vec![0.0; 42];
        let mut ys: Vec<f64> = (0..41).map(|i| -90.0 + 0.2 * i as f64).collect();
        ys.push(70.0);
        let est = NwEstimator::with_bandwidths(&xs, &ys, 1.0, 1.7).unwrap();
        let d = est.density(0.0).unwrap();
        let qs: Vec<f64> = [0.001, 0.01, 0.1, 0.5, 0.9, 0.99, 0.999].iter().map(|p| d.quantile(*p).unwrap()).collect();
        assert!(qs.windows(2).all(|w| w[0] <= w[1]), "{qs:?}");
        for (p, q) in [0.001, 0.01, 0.1, 0.5, 0.9, 0.99, 0.999].iter().zip(&qs) {
            assert!((d.cdf(*q) - p).abs() < 1e-9);
        }
    }

    #[test]
    fn far_query_uses_neighbours() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let est = NwEstimator::with_bandwidths(&xs, &ys, 0.01, 1.0).unwrap();
        let d = est.density(1e6).unwrap();
        assert!(d.is_fallback());
        assert_eq!(d.n_components(), FALLBACK_NEIGHBOURS);
        assert!(d.quantile(0.5).unwrap() > 70.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(NwEstimator::fit(&[], &[]), Err(Error::State(_))));
        assert!(NwEstimator::with_bandwidths(&[1.0], &[1.0], 0.0, 1.0).is_err());
        assert!(NwEstimator::with_bandwidths(&[1.0], &[1.0, 2.0], 1.0, 1.0).is_err());
        let est = NwEstimator::fit(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!(est.density(f64::NAN).is_err());
        assert!(est.bandwidth_x > 0.0);
    }
}
