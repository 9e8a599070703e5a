//! Tail detection and the adaptive training weights.
//!
//! Bounds come from a generalized boxplot: data are rank-transformed to
//! normal scores, a Tukey g-and-h law is fitted to the scores by letter
//! values, its `δ/2` and `1 - δ/2` quantiles are mapped back to data units
//! through the interpolated empirical CDF.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::stats;

/// Default tail detection rate.
pub const DEFAULT_DELTA: f64 = 0.05;

const LETTER_LEVELS: [f64; 4] = [0.75, 0.9, 0.95, 0.99];

/// Lower and upper fences with the detection rate that produced them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBounds {
    pub lower: f64,
    pub upper: f64,
    pub delta: f64,
}

/// Per-observation training weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleWeights {
    pub weights: Vec<f64>,
    pub tail_mask: Vec<bool>,
    pub n_total: usize,
    pub n_tail: usize,
    /// Set when no observation fell outside the bounds.
    pub warning: Option<String>,
}

impl SampleWeights {
    /// Unit weights for `n` observations.
    pub fn uniform(n: usize) -> Self {
        Self { weights: vec![1.0; n], tail_mask: vec![false; n], n_total: n, n_tail: 0, warning: None }
    }

    /// Weight carried by tail observations.
    pub fn tail_weight(&self) -> f64 {
        if self.n_tail == 0 {
            1.0
        } else {
            (self.n_total as f64 / self.n_tail as f64).sqrt()
        }
    }
}

/// Fitted Tukey g-and-h parameters on the normal-score scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GAndH {
    pub a: f64,
    pub b: f64,
    pub g: f64,
    pub h: f64,
}

impl GAndH {
    pub fn quantile_at_z(&self, z: f64) -> f64 {
        let core = if self.g.abs() < 1e-12 { z } else { ((self.g * z).exp() - 1.0) / self.g };
        self.a + self.b * core * (0.5 * self.h * z * z).exp()
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = 0.5 * ((i + 1) + (j + 1)) as f64;
        for k in i..=j {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Letter-value estimate of (A, B, g, h) from a sorted sample.
pub fn fit_g_and_h(sorted: &[f64]) -> GAndH {
    let normal = std_normal();
    let a = stats::quantile_sorted(sorted, 0.5);
    let mut gs: Vec<f64> = LETTER_LEVELS
        .iter()
        .filter_map(|p| {
            let z = normal.inverse_cdf(*p);
            let up = stats::quantile_sorted(sorted, *p) - a;
            let lo = a - stats::quantile_sorted(sorted, 1.0 - p);
            (up > 0.0 && lo > 0.0).then(|| (up / lo).ln() / z)
        })
        .collect();
    gs.sort_by(f64::total_cmp);
    let g = if gs.is_empty() {
        0.0
    } else if gs.len() % 2 == 1 {
        gs[gs.len() / 2]
    } else {
        0.5 * (gs[gs.len() / 2 - 1] + gs[gs.len() / 2])
    };
    // ln(spread_p) = ln B + h z²/2
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in LETTER_LEVELS {
        let z = normal.inverse_cdf(p);
        let spread = stats::quantile_sorted(sorted, p) - stats::quantile_sorted(sorted, 1.0 - p);
        let denom = if g.abs() < 1e-12 { 2.0 * z } else { ((g * z).exp() - (-g * z).exp()) / g };
        if spread > 0.0 && denom > 0.0 {
            xs.push(0.5 * z * z);
            ys.push((spread / denom).ln());
        }
    }
    let (b, h) = match xs.len() {
        0 => (1.0, 0.0),
        1 => (ys[0].exp(), 0.0),
        _ => {
            let mx = stats::mean(&xs);
            let my = stats::mean(&ys);
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let h = (sxy / sxx).clamp(0.0, 0.5);
            ((my - h * mx).exp(), h)
        }
    };
    GAndH { a, b, g, h }
}

/// Inverse of the piecewise-linear empirical CDF through `(x_(i), i/(n+1))`,
/// extended linearly beyond the first and last order statistics.
fn inverse_rank(sorted: &[f64], u: f64) -> f64 {
    let n = sorted.len();
    let pos = u * (n + 1) as f64 - 1.0;
    let k = (pos.floor().max(0.0) as usize).min(n - 2);
    let frac = pos - k as f64;
    sorted[k] + frac * (sorted[k + 1] - sorted[k])
}

/// Generalized-boxplot fences at detection rate `delta`.
pub fn fit_tail_bounds(series: &[f64], delta: f64) -> Result<TailBounds> {
    if series.len() < 100 {
        return Err(Error::input(format!("tail bounds need at least 100 observations, got {}", series.len())));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::input(format!("delta must lie in (0, 0.5), got {delta}")));
    }
    let sorted = stats::sorted(series)?;
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::input("degenerate series: all values equal"));
    }
    let n = series.len() as f64;
    let normal = std_normal();
    let mut scores: Vec<f64> = average_ranks(series).iter().map(|r| normal.inverse_cdf(r / (n + 1.0))).collect();
    scores.sort_by(f64::total_cmp);
    let tgh = fit_g_and_h(&scores);
    let to_data = |p: f64| {
        let z = tgh.quantile_at_z(normal.inverse_cdf(p));
        inverse_rank(&sorted, normal.cdf(z))
    };
    let lower = to_data(0.5 * delta);
    let upper = to_data(1.0 - 0.5 * delta);
    if !(lower < upper) {
        return Err(Error::input("degenerate series: tail bounds collapsed"));
    }
    Ok(TailBounds { lower, upper, delta })
}

/// Weight `√(n/n_tail)` on observations outside the bounds, 1 elsewhere.
pub fn compute_weights(series: &[f64], bounds: &TailBounds) -> Result<SampleWeights> {
    if !(bounds.lower < bounds.upper) {
        return Err(Error::input("tail bounds must satisfy lower < upper"));
    }
    let tail_mask: Vec<bool> = series.iter().map(|x| *x < bounds.lower || *x > bounds.upper).collect();
    let n_tail = tail_mask.iter().filter(|t| **t).count();
    let n_total = series.len();
    if n_tail == 0 {
        let mut w = SampleWeights::uniform(n_total);
        w.warning = Some("no observations outside the tail bounds; all weights set to 1".into());
        return Ok(w);
    }
    let tw = (n_total as f64 / n_tail as f64).sqrt();
    let weights = tail_mask.iter().map(|t| if *t { tw } else { 1.0 }).collect();
    Ok(SampleWeights { weights, tail_mask, n_total, n_tail, warning: None })
}

/// Draws indices with probability proportional to their weights, with replacement.
#[derive(Clone, Debug)]
pub struct WeightedSampler {
    cum: Vec<f64>,
}

impl WeightedSampler {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::input("sampler needs at least one weight"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::input("sampler weights must be finite and nonnegative"));
        }
        let mut acc = 0.0;
        let cum: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::input("sampler weights sum to zero"));
        }
        Ok(Self { cum })
    }

    pub fn draw(&self, rng: &mut Rng) -> usize {
        let total = *self.cum.last().unwrap();
        let u = rng.random::<f64>() * total;
        self.cum.partition_point(|c| *c <= u).min(self.cum.len() - 1)
    }

    pub fn batch(&self, batch_size: usize, rng: &mut Rng) -> Vec<usize> {
        (0..batch_size).map(|_| self.draw(rng)).collect()
    }
}

/// One batch of `batch_size` indices drawn with `P(t) = w_t / Σw`.
pub fn weighted_batch_sampler(weights: &SampleWeights, batch_size: usize, seed: u64) -> Result<Vec<usize>> {
    if batch_size == 0 {
        return Err(Error::input("batch size must be at least 1"));
    }
    let sampler = WeightedSampler::new(&weights.weights)?;
    Ok(sampler.batch(batch_size, &mut rng::from_seed(seed)))
}
