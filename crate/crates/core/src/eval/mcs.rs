//! Model Confidence Set with the range statistic and a circular block bootstrap.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// `None` selects `⌈n^{1/3}⌉`.
    pub block_length: Option<usize>,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { replicates: 1000, block_length: None, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McsResult {
    /// Indices of models with p-value at least `alpha`, ascending.
    pub survivors: Vec<usize>,
    /// Monotonized MCS p-value of each model, in input order.
    pub p_values: Vec<f64>,
    /// Models in the order they were eliminated; the last entry is never rejected.
    pub elimination_order: Vec<usize>,
    pub alpha: f64,
    pub block_length: usize,
}

/// Runs the full elimination sequence on per-model loss series.
pub fn model_confidence_set(losses: &[Vec<f64>], alpha: f64, boot: &BootstrapConfig) -> Result<McsResult> {
    let m = losses.len();
    if m < 2 {
        return Err(Error::input("model confidence set needs at least two models"));
    }
    let n = losses[0].len();
    if n < 2 || losses.iter().any(|l| l.len() != n) {
        return Err(Error::input("loss series must have equal length of at least 2"));
    }
    if losses.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::input("losses must be finite"));
    }
    if !(alpha > 0.0 && alpha < 1.0) || boot.replicates == 0 {
        return Err(Error::input("alpha must lie in (0, 1) and replicates must be positive"));
    }
    let block = boot.block_length.unwrap_or_else(|| (n as f64).cbrt().ceil() as usize).clamp(1, n);

    let means: Vec<f64> = losses.iter().map(|l| l.iter().sum::<f64>() / n as f64).collect();
    // Bootstrap means per replicate and model; indices are shared across models.
    let mut boot_means = vec![vec![0.0; m]; boot.replicates];
    for (b, row) in boot_means.iter_mut().enumerate() {
        let mut r = rng::stream(boot.seed, b as u64);
        let mut count = 0;
        while count < n {
            let start = r.random_range(0..n);
            for k in 0..block.min(n - count) {
                let t = (start + k) % n;
                for (j, l) in losses.iter().enumerate() {
                    row[j] += l[t];
                }
            }
            count += block.min(n - count);
        }
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }

    let scale = losses.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let tie_tol = 1e-12 * scale;
    // Pairwise studentized differentials; a zero-variance pair is a tie when
    // its mean also vanishes and a certain ordering otherwise.
    let stat = |i: usize, j: usize| -> (f64, f64) {
        let d = means[i] - means[j];
        let var = boot_means.iter().map(|row| (row[i] - row[j] - d).powi(2)).sum::<f64>() / boot.replicates as f64;
        (d, var.sqrt())
    };
    let mut alive: Vec<usize> = (0..m).collect();
    let mut p_values = vec![1.0; m];
    let mut elimination_order = Vec::with_capacity(m);
    let mut running = 0.0_f64;
    while alive.len() > 1 {
        let k = alive.len();
        let mut t = vec![vec![0.0; k]; k];
        let mut sd = vec![vec![0.0; k]; k];
        for a in 0..k {
            for c in (a + 1)..k {
                let (d, s) = stat(alive[a], alive[c]);
                let v = if s > tie_tol {
                    d / s
                } else if d.abs() <= tie_tol {
                    0.0
                } else {
                    d.signum() * f64::INFINITY
                };
                t[a][c] = v;
                t[c][a] = -v;
                sd[a][c] = s;
                sd[c][a] = s;
            }
        }
        let t_range = t.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        let p = if t_range == 0.0 {
            1.0
        } else {
            let exceed = boot_means
                .iter()
                .filter(|row| {
                    let mut tb = 0.0_f64;
                    for a in 0..k {
                        for c in (a + 1)..k {
                            if sd[a][c] > tie_tol {
                                let (i, j) = (alive[a], alive[c]);
                                let centered = row[i] - row[j] - (means[i] - means[j]);
                                tb = tb.max(centered.abs() / sd[a][c]);
                            }
                        }
                    }
                    tb >= t_range
                })
                .count();
            exceed as f64 / boot.replicates as f64
        };
        running = running.max(p);
        // Worst model: largest maximal pairwise statistic, ties broken by mean loss.
        let worst = (0..k)
            .max_by(|a, b| {
                let ta = t[*a].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let tb = t[*b].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                ta.total_cmp(&tb).then(means[alive[*a]].total_cmp(&means[alive[*b]])).then(alive[*b].cmp(&alive[*a]))
            })
            .unwrap();
        let model = alive.remove(worst);
        p_values[model] = running;
        elimination_order.push(model);
    }
    elimination_order.push(alive[0]);
    p_values[alive[0]] = 1.0;
    let mut survivors: Vec<usize> = (0..m).filter(|i| p_values[*i] >= alpha).collect();
    survivors.sort();
    Ok(McsResult { survivors, p_values, elimination_order, alpha, block_length: block })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::from_seed(seed);
        (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
    }

    #[test]
    fn identical_losses_all_survive() {
        let l = noise(300, 1);
        let res = model_confidence_set(&[l.clone(), l.clone(), l], 0.1, &BootstrapConfig::default()).unwrap();
        assert_eq!(res.survivors, vec![0, 1, 2]);
        assert!(res.p_values.iter().all(|p| *p == 1.0));
    }

    #[test]
    fn dominated_model_is_eliminated() {
        let base = noise(500, 2);
        let shifted: Vec<f64> = base.iter().map(|v| v + 10.0).collect();
        let other = noise(500, 3);
        let res = model_confidence_set(&[base, shifted, other], 0.1, &BootstrapConfig::default()).unwrap();
        assert!(res.p_values[1] < 0.01);
        assert!(!res.survivors.contains(&1));
        assert_eq!(res.elimination_order[0], 1);
    }

    #[test]
    fn noisy_shift_is_eliminated() {
        let a = noise(1000, 4);
        let b: Vec<f64> = noise(1000, 5).iter().map(|v| v + 10.0).collect();
        let res = model_confidence_set(&[a, b], 0.1, &BootstrapConfig::default()).unwrap();
        assert!(res.p_values[1] < 0.01);
        assert_eq!(res.survivors, vec![0]);
    }

    #[test]
    fn nested_across_levels() {
        let ls: Vec<Vec<f64>> = (0..5).map(|k| noise(400, 10 + k).iter().map(|v| v + 0.08 * k as f64).collect()).collect();
        let cfg = BootstrapConfig { seed: 3, ..Default::default() };
        let wide = model_confidence_set(&ls, 0.10, &cfg).unwrap();
        let narrow = model_confidence_set(&ls, 0.25, &cfg).unwrap();
        assert!(narrow.survivors.iter().all(|s| wide.survivors.contains(s)));
        let ordered: Vec<f64> = wide.elimination_order.iter().map(|i| wide.p_values[*i]).collect();
        let sorted = {
            let mut s = ordered.clone();
            s.sort_by(f64::total_cmp);
            s
        };
        assert_eq!(ordered, sorted);
    }

    #[test]
    fn order_invariant() {
        let ls: Vec<Vec<f64>> = (0..4).map(|k| noise(300, 20 + k).iter().map(|v| v + 0.3 * k as f64).collect()).collect();
        let cfg = BootstrapConfig::default();
        let a = model_confidence_set(&ls, 0.1, &cfg).unwrap();
        let rev: Vec<Vec<f64>> = ls.iter().rev().cloned().collect();
        let b = model_confidence_set(&rev, 0.1, &cfg).unwrap();
        let mapped: Vec<usize> = {
            let mut v: Vec<usize> = b.survivors.iter().map(|i| 3 - i).collect();
            v.sort();
            v
        };
        assert_eq!(a.survivors, mapped);
    }

    #[test]
    fn input_checks() {
        assert!(model_confidence_set(&[vec![1.0, 2.0]], 0.1, &BootstrapConfig::default()).is_err());
        assert!(model_confidence_set(&[vec![1.0, 2.0], vec![1.0]], 0.1, &BootstrapConfig::default()).is_err());
        assert!(model_confidence_set(&[vec![1.0, 2.0], vec![1.0, 3.0]], 1.5, &BootstrapConfig::default()).is_err());
    }
}
