//! Center, tails and total regions of the conditioning range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marma::empirical_quantiles;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Center,
    Tails,
    Total,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Center, Region::Tails, Region::Total];

    pub fn name(self) -> &'static str {
        match self {
            Region::Center => "center",
            Region::Tails => "tails",
            Region::Total => "total",
        }
    }
}

/// Marginal quantiles `q₀.₀₁ ≤ q₀.₁₀ ≤ q₀.₉₀ ≤ q₀.₉₉` in data units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    pub q01: f64,
    pub q10: f64,
    pub q90: f64,
    pub q99: f64,
}

impl RegionPartition {
    pub fn new(q01: f64, q10: f64, q90: f64, q99: f64) -> Result<Self> {
        if !(q01 < q10 && q10 < q90 && q90 < q99) || ![q01, q99].iter().all(|v| v.is_finite()) {
            return Err(Error::input(format!("region quantiles must be finite and increasing, got {q01}, {q10}, {q90}, {q99}")));
        }
        Ok(Self { q01, q10, q90, q99 })
    }

    /// From the empirical marginal of a series.
    pub fn from_series(path: &[f64]) -> Result<Self> {
        let q = empirical_quantiles(path, &[0.01, 0.10, 0.90, 0.99])?;
        Self::new(q[0], q[1], q[2], q[3])
    }

    /// From a marginal quantile function.
    pub fn from_quantile<F: Fn(f64) -> f64>(q: F) -> Result<Self> {
        Self::new(q(0.01), q(0.10), q(0.90), q(0.99))
    }

    /// The sub-region holding `x`: center for `[q₀.₁₀, q₀.₉₀]`, tails for the
    /// rest of `[q₀.₀₁, q₀.₉₉]`, `None` outside.
    pub fn classify(&self, x: f64) -> Option<Region> {
        if !(x >= self.q01 && x <= self.q99) {
            None
        } else if x >= self.q10 && x <= self.q90 {
            Some(Region::Center)
        } else {
            Some(Region::Tails)
        }
    }

    pub fn contains(&self, region: Region, x: f64) -> bool {
        match (region, self.classify(x)) {
            (Region::Total, Some(_)) => true,
            (r, Some(c)) => r == c,
            _ => false,
        }
    }

    /// The region as a union of intervals.
    pub fn intervals(&self, region: Region) -> Vec<(f64, f64)> {
        match region {
            Region::Center => vec![(self.q10, self.q90)],
            Region::Tails => vec![(self.q01, self.q10), (self.q90, self.q99)],
            Region::Total => vec![(self.q01, self.q99)],
        }
    }
}

/// A scalar per region; `None` when the region held no points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionScores {
    pub center: Option<f64>,
    pub tails: Option<f64>,
    pub total: Option<f64>,
}

impl RegionScores {
    pub fn get(&self, region: Region) -> Option<f64> {
        match region {
            Region::Center => self.center,
            Region::Tails => self.tails,
            Region::Total => self.total,
        }
    }

    fn set(&mut self, region: Region, v: Option<f64>) {
        match region {
            Region::Center => self.center = v,
            Region::Tails => self.tails = v,
            Region::Total => self.total = v,
        }
    }

    /// Mean of `values` over the grid points of each region.
    pub fn mean_by_region(grid: &[f64], values: &[f64], partition: &RegionPartition) -> Result<Self> {
        Self::reduce(grid, values, partition, |v| v.iter().sum::<f64>() / v.len() as f64)
    }

    fn reduce<F: Fn(&[f64]) -> f64>(grid: &[f64], values: &[f64], partition: &RegionPartition, f: F) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::input("grid and values differ in length"));
        }
        let mut out = Self::default();
        for region in Region::ALL {
            let sel: Vec<f64> = grid.iter().zip(values).filter(|(x, _)| partition.contains(region, **x)).map(|(_, v)| *v).collect();
            out.set(region, if sel.is_empty() { None } else { Some(f(&sel)) });
        }
        Ok(out)
    }
}

/// Root mean squared difference per region of the conditioning values.
pub fn moment_rmse(estimated: &[f64], reference: &[f64], grid: &[f64], partition: &RegionPartition) -> Result<RegionScores> {
    if estimated.len() != reference.len() {
        return Err(Error::input("estimated and reference moments differ in length"));
    }
    let sq: Vec<f64> = estimated.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).collect();
    RegionScores::reduce(grid, &sq, partition, |v| (v.iter().sum::<f64>() / v.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marma::{build_conditioning_grid, simulate_marma, Preset};
    use proptest::prelude::*;

    fn part() -> RegionPartition {
        RegionPartition::new(-10.0, -2.0, 3.0, 12.0).unwrap()
    }

    #[test]
    fn rmse_identities() {
        let grid = [-9.0, -1.0, 0.0, 5.0, 11.0];
        let r = [1.0, 2.0, 3.0, 4.0, 5.0];
        let z = moment_rmse(&r, &r, &grid, &part()).unwrap();
        assert_eq!((z.center, z.tails, z.total), (Some(0.0), Some(0.0), Some(0.0)));
        let off: Vec<f64> = r.iter().map(|v| v + 0.7).collect();
        let s = moment_rmse(&off, &r, &grid, &part()).unwrap();
        for reg in Region::ALL {
            assert!((s.get(reg).unwrap() - 0.7).abs() < 1e-12);
        }
        assert!(moment_rmse(&r[..2], &r, &grid, &part()).is_err());
        let empty = moment_rmse(&[1.0], &[1.0], &[0.0], &part()).unwrap();
        assert_eq!(empty.tails, None);
    }

    #[test]
    fn grid_counts_follow_quantiles() {
        let path = simulate_marma(&Preset::Mar01.spec(1.4).unwrap(), 20_000, 2000, 4).unwrap().values;
        let grid = build_conditioning_grid(&path, 5000).unwrap();
        let p = RegionPartition::from_series(&path).unwrap();
        let count = |r| grid.iter().filter(|x| p.contains(r, **x)).count();
        assert_eq!(count(Region::Total), 5000);
        assert_eq!(count(Region::Center) + count(Region::Tails), 5000);
        let step = (p.q99 - p.q01) / 4999.0;
        let expect = ((p.q90 - p.q10) / step).floor() as i64;
        assert!((count(Region::Center) as i64 - expect).abs() <= 1);
    }

    #[test]
    fn rejects_unordered() {
        assert!(RegionPartition::new(0.0, 0.0, 1.0, 2.0).is_err());
        assert!(RegionPartition::from_quantile(|p| p).is_ok());
    }

    proptest! {
        #[test]
        fn exhaustive_and_disjoint(x in -10.0..12.0f64) {
            let p = part();
            let c = p.contains(Region::Center, x);
            let t = p.contains(Region::Tails, x);
            prop_assert!(c ^ t);
            prop_assert!(p.contains(Region::Total, x));
            let inside = |r: Region| p.intervals(r).iter().any(|(a, b)| x >= *a && x <= *b);
            prop_assert!(inside(Region::Total));
            prop_assert!(!c || inside(Region::Center));
        }
    }
}
