//! Shared forecasting and scoring routines for the study designs: density
//! divergence against the oracle on a conditioning grid, moment curves, and
//! proper scores on held-out realizations.

use serde::{Deserialize, Serialize};

use crate::baselines::{cauchy_predictive, CauchyMar1Oracle, NwEstimator};
use crate::density::{linspace, local_modes, PredictiveDensity};
use crate::error::{Error, Result};
use crate::eval::{self, Interval, RegionPartition, RegionScores};
use crate::mdn::{predict_density, MdnModel};
use crate::quadrature;
use crate::recal::{recalibrate_density, RecalibrationModel};

/// Points of the density grid written per conditioning value.
pub const DENSITY_GRID: usize = 1024;
/// Relative height below which local maxima are not counted as modes.
pub const MODE_THRESHOLD: f64 = 0.01;
pub const FORECAST_QUANTILES: [f64; 5] = [0.05, 0.1, 0.5, 0.9, 0.95];
/// Probability levels truncating forecast moments.
pub const MOMENT_TRUNC: (f64, f64) = (0.01, 0.99);
pub const WHOLE_LINE: [Interval; 1] = [(f64::NEG_INFINITY, f64::INFINITY)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mdn,
    MdnRecal,
    Nw,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mdn => "mdn",
            Method::MdnRecal => "mdn_recal",
            Method::Nw => "nw",
            Method::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mdn" => Ok(Method::Mdn),
            "mdn_recal" => Ok(Method::MdnRecal),
            "nw" => Ok(Method::Nw),
            "oracle" => Ok(Method::Oracle),
            _ => Err(Error::input(format!("unknown method {s}"))),
        }
    }
}

/// The fitted forecasters of one horizon.
#[derive(Clone, Debug, Default)]
pub struct Forecasters {
    pub mdn: Option<MdnModel>,
    pub recal: Option<RecalibrationModel>,
    pub nw: Option<NwEstimator>,
    pub oracle: Option<CauchyMar1Oracle>,
}

impl Forecasters {
    pub fn has(&self, m: Method) -> bool {
        match m {
            Method::Mdn => self.mdn.is_some(),
            Method::MdnRecal => self.mdn.is_some() && self.recal.is_some(),
            Method::Nw => self.nw.is_some(),
            Method::Oracle => self.oracle.is_some(),
        }
    }

    /// Predictive law of `method` given the conditioning vector `x`; the
    /// kernel smoother and the oracle use its last entry.
    pub fn density(&self, method: Method, x: &[f64]) -> Result<Box<dyn PredictiveDensity>> {
        let missing = || Error::State(format!("no fitted {} forecaster", method.name()));
        let last = *x.last().ok_or_else(|| Error::input("empty conditioning vector"))?;
        Ok(match method {
            Method::Mdn => Box::new(predict_density(self.mdn.as_ref().ok_or_else(missing)?, x)?),
            Method::MdnRecal => {
                let base = predict_density(self.mdn.as_ref().ok_or_else(missing)?, x)?;
                Box::new(recalibrate_density(base, self.recal.as_ref().ok_or_else(missing)?, x)?)
            }
            Method::Nw => Box::new(self.nw.as_ref().ok_or_else(missing)?.density(last)?),
            Method::Oracle => Box::new(cauchy_predictive(self.oracle.as_ref().ok_or_else(missing)?, last)?),
        })
    }
}

/// KL and ISE of a candidate against the oracle at one conditioning value,
/// integrated over the whole real line.
pub fn divergence_at<D: PredictiveDensity + ?Sized>(oracle: &CauchyMar1Oracle, candidate: &D, x: f64) -> Result<(f64, f64)> {
    let truth = cauchy_predictive(oracle, x)?;
    eval::kl_and_ise(&truth, candidate, &WHOLE_LINE)
}

/// Per-region means of pointwise KL and ISE over a conditioning grid.
pub fn divergence_scores<F>(oracle: &CauchyMar1Oracle, candidate: F, grid: &[f64], partition: &RegionPartition) -> Result<(RegionScores, RegionScores)>
where
    F: Fn(f64) -> Result<Box<dyn PredictiveDensity>>,
{
    let mut kl = Vec::with_capacity(grid.len());
    let mut is = Vec::with_capacity(grid.len());
    for (i, x) in grid.iter().enumerate() {
        let d = candidate(*x).map_err(|e| Error::numeric(Some(i), e.to_string()))?;
        let (a, b) = divergence_at(oracle, d.as_ref(), *x)?;
        kl.push(a);
        is.push(b);
    }
    Ok((RegionScores::mean_by_region(grid, &kl, partition)?, RegionScores::mean_by_region(grid, &is, partition)?))
}

/// Proper scores of one forecast against its realization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationScores {
    pub crps: f64,
    pub log_score: f64,
    pub cde: f64,
    pub quantile_score: f64,
}

pub const SCORE_NAMES: [&str; 4] = ["cde_loss", "crps", "log_score", "qs10"];

impl ObservationScores {
    pub fn compute<D: PredictiveDensity + ?Sized>(d: &D, y: f64) -> Result<Self> {
        Ok(Self {
            crps: eval::crps(d, y, eval::DEFAULT_TRUNC)?,
            log_score: eval::log_score(d, y)?,
            cde: eval::cde_term(d, y, eval::DEFAULT_TRUNC)?,
            quantile_score: eval::quantile_score(d, y, 0.1)?,
        })
    }

    /// Value by name in [`SCORE_NAMES`].
    pub fn get(&self, name: &str) -> f64 {
        match name {
            "cde_loss" => self.cde,
            "crps" => self.crps,
            "log_score" => self.log_score,
            "qs10" => self.quantile_score,
            _ => f64::NAN,
        }
    }
}

/// Summary of one predictive law for reporting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointForecast {
    pub x: f64,
    pub y_grid: Vec<f64>,
    pub pdf: Vec<f64>,
    pub quantiles: Vec<f64>,
    /// Truncated moments of orders 1 to 4.
    pub moments: Vec<f64>,
    pub n_modes: usize,
    /// Whole-line integral of the density.
    pub mass: f64,
}

/// `n` points on `c ± 3 max(|x - c|, s)`; wide enough to hold both the
/// crash and the continuation modes of a bubble forecast.
pub fn density_grid(x: f64, center: f64, scale: f64, n: usize) -> Vec<f64> {
    let half = 3.0 * (x - center).abs().max(scale);
    linspace(center - half, center + half, n)
}

/// Local modes of `d` on `grid`.
pub fn count_modes<D: PredictiveDensity + ?Sized>(d: &D, grid: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = grid.iter().map(|y| d.pdf(*y)).collect();
    local_modes(&v, MODE_THRESHOLD).into_iter().map(|i| grid[i]).collect()
}

pub fn point_forecast<D: PredictiveDensity + ?Sized>(d: &D, x: f64, y_grid: Vec<f64>) -> Result<PointForecast> {
    let pdf: Vec<f64> = y_grid.iter().map(|y| d.pdf(*y)).collect();
    let n_modes = local_modes(&pdf, MODE_THRESHOLD).len();
    let quantiles = FORECAST_QUANTILES.iter().map(|p| d.quantile(*p)).collect::<Result<Vec<_>>>()?;
    let moments = (1..=4).map(|k| d.moment(k, MOMENT_TRUNC)).collect::<Result<Vec<_>>>()?;
    let mass = quadrature::integrate(|y| d.pdf(y), &d.hints(), f64::NEG_INFINITY, f64::INFINITY);
    Ok(PointForecast { x, y_grid, pdf, quantiles, moments, n_modes, mass })
}

/// Held-out pairs `(conditioning vector, realization)` from a test series
/// preceded by `history` (the tail of the calibration or training series),
/// so that every test value is forecast.
pub fn test_pairs(history: &[f64], test: &[f64], input_dim: usize, horizon: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let need = input_dim + horizon - 1;
    if history.len() < need {
        return Err(Error::input("history too short for the lags and horizon"));
    }
    let mut joined = history[history.len() - need..].to_vec();
    joined.extend_from_slice(test);
    let n = test.len();
    let inputs = (0..n).map(|i| joined[i..i + input_dim].to_vec()).collect();
    Ok((inputs, test.to_vec()))
}
