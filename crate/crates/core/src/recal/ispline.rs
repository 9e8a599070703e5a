//! Monotone I-spline basis on `[0, 1]`.
//!
//! With cubic B-splines `B_0 … B_{m-1}` on a clamped knot vector, the
//! functions `I_j = Σ_{i≥j} B_i` for `j = 1 … m-1` are nondecreasing, vanish
//! at 0 and equal 1 at 1. Their derivatives are
//! `I_j' = 3 B_{j,2} / (t_{j+3} - t_j)` with `B_{j,2}` the quadratic B-spline.

use serde::{Deserialize, Serialize};

/// Knots and degree of the basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ISplineBasis {
    pub knots: Vec<f64>,
    pub degree: usize,
}

impl ISplineBasis {
    /// Cubic basis with `interior` equispaced interior knots.
    pub fn cubic(interior: usize) -> Self {
        let degree = 3;
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..=interior).map(|i| i as f64 / (interior + 1) as f64));
        knots.extend(vec![1.0; degree + 1]);
        Self { knots, degree }
    }

    /// Number of B-splines of the configured degree.
    fn n_bsplines(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Number of I-spline functions.
    pub fn len(&self) -> usize {
        self.n_bsplines() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All B-splines of degree `k` at `x` (Cox–de Boor).
    fn bsplines(&self, x: f64, k: usize) -> Vec<f64> {
        let t = &self.knots;
        let x = x.clamp(0.0, 1.0);
        let n0 = t.len() - 1;
        let mut b: Vec<f64> = (0..n0)
            .map(|i| {
                let inside = t[i] <= x && x < t[i + 1];
                // The right end belongs to the last nonempty interval.
                let at_end = x == t[n0] && t[i] < t[i + 1] && t[i + 1] == t[n0];
                if inside || at_end {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        for d in 1..=k {
            let len = n0 - d;
            let mut next = vec![0.0; len];
            for i in 0..len {
                let mut v = 0.0;
                let l = t[i + d] - t[i];
                if l > 0.0 {
                    v += (x - t[i]) / l * b[i];
                }
                let r = t[i + d + 1] - t[i + 1];
                if r > 0.0 {
                    v += (t[i + d + 1] - x) / r * b[i + 1];
                }
                next[i] = v;
            }
            b = next;
        }
        b
    }

    /// `I_1(x) … I_{m-1}(x)`.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let b = self.bsplines(x, self.degree);
        let mut out = vec![0.0; self.len()];
        let mut acc = 0.0;
        for j in (1..b.len()).rev() {
            acc += b[j];
            out[j - 1] = acc;
        }
        out
    }

    /// `I_1'(x) … I_{m-1}'(x)`.
    pub fn deriv(&self, x: f64) -> Vec<f64> {
        let k = self.degree;
        let b = self.bsplines(x, k - 1);
        let t = &self.knots;
        (1..=self.len())
            .map(|j| {
                let span = t[j + k] - t[j];
                if span > 0.0 {
                    k as f64 * b[j] / span
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Coefficients reproducing the identity map `β(τ) = τ`.
    pub fn identity_coefficients(&self) -> Vec<f64> {
        let k = self.degree;
        let t = &self.knots;
        let greville: Vec<f64> = (0..self.n_bsplines()).map(|i| t[i + 1..=i + k].iter().sum::<f64>() / k as f64).collect();
        greville.windows(2).map(|w| w[1] - w[0]).collect()
    }
}
