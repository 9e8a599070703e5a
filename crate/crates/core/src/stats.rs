//! Small descriptive statistics used by simulation checks and calibration.

use crate::error::{Error, Result};

/// Type-7 (linear interpolation) quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sorted copy with NaN rejected.
pub fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::input("empty series"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::input("series contains NaN"));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

pub fn median(values: &[f64]) -> Result<f64> {
    Ok(quantile_sorted(&sorted(values)?, 0.5))
}

/// Interquartile range (type-7 quartiles).
pub fn iqr(values: &[f64]) -> Result<f64> {
    let s = sorted(values)?;
    Ok(quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25))
}

/// Robust scale `IQR / 1.349`, the normal-consistent standard deviation.
pub fn robust_scale(values: &[f64]) -> Result<f64> {
    Ok(iqr(values)? / 1.349)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Sample autocorrelation at `lag`.
pub fn acf(values: &[f64], lag: usize) -> f64 {
    let n = values.len();
    let m = mean(values);
    let den: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    let num: f64 = (0..n - lag).map(|t| (values[t] - m) * (values[t + lag] - m)).sum();
    num / den
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<f64> {
    let s = sorted(values)?;
    let n = s.len() as f64;
    Ok(s.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    }))
}

/// KS distance of a sample on `[0, 1]` to the uniform law.
pub fn ks_uniform(values: &[f64]) -> Result<f64> {
    ks_one_sample(values, |u| u.clamp(0.0, 1.0))
}
