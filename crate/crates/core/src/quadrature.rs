//! Gauss–Legendre panels over feature-adaptive partitions of the real line.
//!
//! A density advertises where it has structure through [`Hint`]s: a centre
//! and a local length scale. [`partition`] marches across an interval with a
//! step equal to half the distance to the nearest hint (never less than half
//! that hint's scale), so panels are fine near features and grow
//! geometrically into the tails. Each panel is then integrated with an
//! 8-point Gauss–Legendre rule.

use std::sync::OnceLock;

/// A location where a density has structure, with its local length scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hint {
    pub center: f64,
    pub scale: f64,
}

impl Hint {
    pub fn new(center: f64, scale: f64) -> Self {
        Self { center, scale }
    }
}

/// How far past the outermost hint an unbounded integral is carried, in hint scales.
pub const DEFAULT_REACH: f64 = 1e12;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = x;
                p0 = 1.0;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// The 8-point rule used by every panel integral in the crate.
pub fn gl8() -> &'static ([f64; 8], [f64; 8]) {
    static RULE: OnceLock<([f64; 8], [f64; 8])> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauss_legendre(8);
        let mut nodes = [0.0; 8];
        let mut weights = [0.0; 8];
        nodes.copy_from_slice(&x);
        weights.copy_from_slice(&w);
        (nodes, weights)
    })
}

/// `C[k][j] = ∫_{-1}^{x_k} L_j(t) dt` for the Lagrange basis `L_j` on the
/// 8-point nodes, so `Σ_j C[k][j] f(x_j)` integrates `f` from `-1` to `x_k`.
pub fn gl8_cumulative() -> &'static [[f64; 8]; 8] {
    static MATRIX: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let (x, w) = gl8();
        let lagrange = |j: usize, t: f64| (0..8).filter(|i| *i != j).map(|i| (t - x[i]) / (x[j] - x[i])).product::<f64>();
        let mut c = [[0.0; 8]; 8];
        for k in 0..8 {
            let (m, r) = (0.5 * (x[k] - 1.0), 0.5 * (x[k] + 1.0));
            for j in 0..8 {
                c[k][j] = r * (0..8).map(|i| w[i] * lagrange(j, m + r * x[i])).sum::<f64>();
            }
        }
        c
    })
}

/// Integral of `f` over `[a, b]` by one 8-point panel.
#[inline]
pub fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = gl8();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for i in 0..8 {
        acc += w[i] * f(mid + half * x[i]);
    }
    acc * half
}

/// Sum of 8-point panels over consecutive breakpoints.
pub fn integrate_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64]) -> f64 {
    breaks.windows(2).map(|ab| panel(&f, ab[0], ab[1])).sum()
}

fn step_at(y: f64, hints: &[Hint]) -> f64 {
    hints.iter().map(|h| (0.5 * h.scale).max(0.5 * (y - h.center).abs())).fold(f64::INFINITY, f64::min)
}

/// Extent `[lo, hi]` reached by unbounded integrals over `hints`.
pub fn reach(hints: &[Hint], factor: f64) -> (f64, f64) {
    let lo = hints.iter().map(|h| h.center - factor * h.scale).fold(f64::INFINITY, f64::min);
    let hi = hints.iter().map(|h| h.center + factor * h.scale).fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Breakpoints covering `[lo, hi]`, adapted to `hints`. Infinite ends are
/// replaced by [`reach`] with [`DEFAULT_REACH`].
pub fn partition(hints: &[Hint], lo: f64, hi: f64) -> Vec<f64> {
    let (rlo, rhi) = reach(hints, DEFAULT_REACH);
    let lo = if lo.is_finite() { lo } else { rlo };
    let hi = if hi.is_finite() { hi } else { rhi };
    if !(hi > lo) {
        return vec![lo, lo];
    }
    let mut centers: Vec<f64> = hints.iter().map(|h| h.center).filter(|c| *c > lo && *c < hi).collect();
    centers.sort_by(f64::total_cmp);
    let mut out = vec![lo];
    let mut y = lo;
    let mut next_center = 0;
    while y < hi {
        while next_center < centers.len() && centers[next_center] <= y {
            next_center += 1;
        }
        let mut next = y + step_at(y, hints);
        if next_center < centers.len() && centers[next_center] < next {
            next = centers[next_center];
        }
        if next >= hi || hi - next < 1e-3 * (next - y) {
            next = hi;
        }
        if next <= y {
            // Step vanished below the floating-point spacing.
            next = hi;
        }
        out.push(next);
        y = next;
    }
    out
}

/// Splits every panel of `breaks` into `m` equal sub-panels.
pub fn refine(breaks: &[f64], m: usize) -> Vec<f64> {
    if m <= 1 || breaks.len() < 2 {
        return breaks.to_vec();
    }
    let mut out = Vec::with_capacity((breaks.len() - 1) * m + 1);
    out.push(breaks[0]);
    for ab in breaks.windows(2) {
        let w = (ab[1] - ab[0]) / m as f64;
        for j in 1..m {
            out.push(ab[0] + w * j as f64);
        }
        out.push(ab[1]);
    }
    out
}

/// Equal-width panels over `[lo, hi]` merged with the adaptive partition.
pub fn partition_with_uniform(hints: &[Hint], lo: f64, hi: f64, uniform_panels: usize) -> Vec<f64> {
    let mut breaks = partition(hints, lo, hi);
    let (lo, hi) = (breaks[0], *breaks.last().unwrap());
    if uniform_panels > 0 && hi > lo {
        let w = (hi - lo) / uniform_panels as f64;
        breaks.extend((1..uniform_panels).map(|j| lo + w * j as f64));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    }
    breaks
}

/// Adaptive integral of `f` over `[lo, hi]`, either end possibly infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, hints: &[Hint], lo: f64, hi: f64) -> f64 {
    integrate_breaks(f, &partition(hints, lo, hi))
}
