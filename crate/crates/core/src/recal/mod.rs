//! Local PIT recalibration.
//!
//! A calibration set yields PIT values `F̂(y | x)`. For each level τ a boosted
//! classifier estimates `β(τ | x) = P(PIT ≤ τ | x)`; per instance these are
//! projected onto nonnegative I-spline combinations, giving a monotone map
//! with `β(0) = 0` and `β(1) = 1`. The recalibrated law has distribution
//! function `β(F̂(y) | x)` and density `β'(F̂(y) | x) p̂(y)`.

mod gbdt;
mod ispline;
mod nnls;

pub use gbdt::{Gbdt, GbdtParams, Node, Tree};
pub use ispline::ISplineBasis;
pub use nnls::{isotonic, nnls};

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::density::{check_level, PredictiveDensity};
use crate::error::{Error, Result};
use crate::mdn::{predict_density, MdnModel, TrainingSet};
use crate::quadrature::Hint;
use crate::stats;

pub const RECAL_FORMAT_VERSION: u32 = 1;
const RECAL_FORMAT: &str = "bubblecast-recal";
pub const PIT_CLIP: f64 = 1e-6;
pub const MIN_CALIBRATION: usize = 500;
const MIN_NORMALIZER: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PitSample {
    pub features: Vec<f64>,
    pub pit: f64,
}

/// PIT values of `targets` under the laws returned by `density`, clipped to
/// `[1e-6, 1 - 1e-6]`.
pub fn compute_pit_with<D, F>(inputs: &[Vec<f64>], targets: &[f64], density: F) -> Result<Vec<PitSample>>
where
    D: PredictiveDensity,
    F: Fn(&[f64]) -> Result<D>,
{
    if inputs.len() != targets.len() {
        return Err(Error::input("inputs and targets differ in length"));
    }
    inputs
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(i, (x, y))| {
            let d = density(x).map_err(|e| Error::numeric(Some(i), e.to_string()))?;
            let u = d.cdf(*y);
            if !u.is_finite() {
                return Err(Error::numeric(Some(i), "non-finite PIT"));
            }
            Ok(PitSample { features: x.clone(), pit: u.clamp(PIT_CLIP, 1.0 - PIT_CLIP) })
        })
        .collect()
}

/// PIT values of a calibration set under a trained network.
pub fn compute_pit(model: &MdnModel, cal: &TrainingSet) -> Result<Vec<PitSample>> {
    compute_pit_with(&cal.inputs, &cal.targets, |x| predict_density(model, x))
}

/// Interior levels `0.05, 0.10, …, 0.95`; the endpoints 0 and 1 are pinned.
pub fn default_tau_grid() -> Vec<f64> {
    (1..20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Boosted(Gbdt),
    /// Used when the labels at this level were all equal.
    Constant {
        rate: f64,
    },
}

impl Classifier {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Classifier::Boosted(g) => g.predict_proba(x),
            Classifier::Constant { rate } => *rate,
        }
    }
}

/// Per-feature centering and scaling applied before the classifiers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaling {
    fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows[0].len();
        let (mut center, mut scale) = (Vec::with_capacity(d), Vec::with_capacity(d));
        for j in 0..d {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            center.push(stats::median(&col)?);
            let s = stats::robust_scale(&col)?;
            scale.push(if s > 0.0 { s } else { 1.0 });
        }
        Ok(Self { center, scale })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).zip(&self.scale).map(|((v, c), s)| (v - c) / s).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecalibrationModel {
    pub tau_grid: Vec<f64>,
    pub classifiers: Vec<Classifier>,
    /// Levels whose classifier fell back to a constant rate.
    pub degenerate_levels: Vec<usize>,
    pub spline_basis: ISplineBasis,
    pub feature_scaling: FeatureScaling,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    model: RecalibrationModel,
}

/// Fits one classifier per interior level of `tau_grid`.
pub fn fit_local_pit(pits: &[PitSample], tau_grid: &[f64]) -> Result<RecalibrationModel> {
    fit_local_pit_with(pits, tau_grid, &GbdtParams::default())
}

pub fn fit_local_pit_with(pits: &[PitSample], tau_grid: &[f64], params: &GbdtParams) -> Result<RecalibrationModel> {
    if pits.len() < MIN_CALIBRATION {
        return Err(Error::input(format!("recalibration needs at least {MIN_CALIBRATION} points, got {}", pits.len())));
    }
    if tau_grid.len() < 2 {
        return Err(Error::input("tau grid needs at least two levels"));
    }
    if tau_grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) || tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("tau grid must be strictly increasing inside (0, 1)"));
    }
    let d = pits[0].features.len();
    if d == 0 || pits.iter().any(|p| p.features.len() != d || p.features.iter().any(|v| !v.is_finite())) {
        return Err(Error::input("calibration features must be finite and of equal length"));
    }
    if pits.iter().any(|p| !(0.0..=1.0).contains(&p.pit)) {
        return Err(Error::input("PIT values must lie in [0, 1]"));
    }
    let raw: Vec<Vec<f64>> = pits.iter().map(|p| p.features.clone()).collect();
    let feature_scaling = FeatureScaling::fit(&raw)?;
    let rows: Vec<Vec<f64>> = raw.iter().map(|r| feature_scaling.apply(r)).collect();
    let mut classifiers = Vec::with_capacity(tau_grid.len());
    let mut degenerate_levels = Vec::new();
    for (k, &tau) in tau_grid.iter().enumerate() {
        let labels: Vec<bool> = pits.iter().map(|p| p.pit <= tau).collect();
        let ones = labels.iter().filter(|l| **l).count();
        if ones == 0 || ones == labels.len() {
            degenerate_levels.push(k);
            classifiers.push(Classifier::Constant { rate: ones as f64 / labels.len() as f64 });
        } else {
            classifiers.push(Classifier::Boosted(Gbdt::fit(&rows, &labels, params)?));
        }
    }
    Ok(RecalibrationModel { tau_grid: tau_grid.to_vec(), classifiers, degenerate_levels, spline_basis: ISplineBasis::cubic(8), feature_scaling })
}

/// A fitted monotone map `β: [0, 1] → [0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BetaHat {
    Spline {
        basis: ISplineBasis,
        coefficients: Vec<f64>,
    },
    /// Piecewise-linear interpolation through isotonic grid values.
    Isotonic {
        knots: Vec<f64>,
        values: Vec<f64>,
    },
}

impl BetaHat {
    pub fn identity() -> Self {
        let basis = ISplineBasis::cubic(8);
        let coefficients = basis.identity_coefficients();
        BetaHat::Spline { basis, coefficients }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self, BetaHat::Isotonic { .. })
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, 1.0);
        match self {
            BetaHat::Spline { basis, coefficients } => dot(&basis.eval(tau), coefficients),
            BetaHat::Isotonic { knots, values } => {
                let k = knots.partition_point(|t| *t <= tau).clamp(1, knots.len() - 1);
                let (t0, t1) = (knots[k - 1], knots[k]);
                values[k - 1] + (values[k] - values[k - 1]) * (tau - t0) / (t1 - t0)
            }
        }
    }

    pub fn deriv(&self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, 1.0);
        match self {
            BetaHat::Spline { basis, coefficients } => dot(&basis.deriv(tau), coefficients),
            BetaHat::Isotonic { knots, values } => {
                let k = knots.partition_point(|t| *t <= tau).clamp(1, knots.len() - 1);
                (values[k] - values[k - 1]) / (knots[k] - knots[k - 1])
            }
        }
    }

    /// Smallest τ with `β(τ) ≥ u`.
    pub fn inverse(&self, u: f64) -> f64 {
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.eval(m) < u {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-16 {
                break;
            }
        }
        b
    }

    /// `∫_0^1 β'(τ) dτ` by Gauss–Legendre on the knot spans.
    pub fn total_mass(&self) -> f64 {
        let knots: Vec<f64> = match self {
            BetaHat::Spline { basis, .. } => {
                let mut k = basis.knots.clone();
                k.dedup();
                k
            }
            BetaHat::Isotonic { knots, .. } => knots.clone(),
        };
        let f = |t: f64| self.deriv(t);
        crate::quadrature::integrate_breaks(f, &knots)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projects classifier outputs `(τ_k, p_k)` onto a monotone spline. Returns
/// the isotonic fallback when the constrained fit fails or is degenerate.
pub fn fit_beta(tau_grid: &[f64], outputs: &[f64], basis: &ISplineBasis) -> BetaHat {
    let mut taus = vec![0.0];
    taus.extend_from_slice(tau_grid);
    taus.push(1.0);
    let mut ys = vec![0.0];
    ys.extend(outputs.iter().map(|p| p.clamp(0.0, 1.0)));
    ys.push(1.0);
    let m = basis.len();
    let a = DMatrix::from_fn(taus.len(), m, |i, j| basis.eval(taus[i])[j]);
    let b = DVector::from_vec(ys.clone());
    if let Ok(c) = nnls(&a, &b) {
        let total: f64 = c.iter().sum();
        if total > 0.0 && total.is_finite() {
            return BetaHat::Spline { basis: basis.clone(), coefficients: c.iter().map(|v| v / total).collect() };
        }
    }
    let mut values = isotonic(&ys);
    values[0] = 0.0;
    *values.last_mut().unwrap() = 1.0;
    let values = isotonic(&values);
    BetaHat::Isotonic { knots: taus, values }
}

/// The per-instance monotone map at feature vector `x`.
pub fn beta_hat(model: &RecalibrationModel, x: &[f64]) -> Result<BetaHat> {
    if x.len() != model.feature_scaling.center.len() {
        return Err(Error::input(format!("expected {} features, got {}", model.feature_scaling.center.len(), x.len())));
    }
    let z = model.feature_scaling.apply(x);
    let outputs: Vec<f64> = model.classifiers.iter().map(|c| c.predict(&z)).collect();
    Ok(fit_beta(&model.tau_grid, &outputs, &model.spline_basis))
}

/// The recalibrated law of a base density under a monotone map.
#[derive(Clone, Debug)]
pub struct RecalibratedDensity<D> {
    base: D,
    beta: BetaHat,
    normalizer: f64,
}

impl<D: PredictiveDensity> RecalibratedDensity<D> {
    pub fn base(&self) -> &D {
        &self.base
    }

    pub fn beta(&self) -> &BetaHat {
        &self.beta
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }
}

impl<D: PredictiveDensity> PredictiveDensity for RecalibratedDensity<D> {
    fn pdf(&self, y: f64) -> f64 {
        let p = self.base.pdf(y);
        if p == 0.0 {
            return 0.0;
        }
        self.beta.deriv(self.base.cdf(y)) * p / self.normalizer
    }

    fn cdf(&self, y: f64) -> f64 {
        (self.beta.eval(self.base.cdf(y)) / self.normalizer).clamp(0.0, 1.0)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        check_level(p)?;
        let tau = self.beta.inverse(p * self.normalizer).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        self.base.quantile(tau)
    }

    fn hints(&self) -> Vec<Hint> {
        self.base.hints()
    }
}

/// Outcome of recalibrating one density.
#[derive(Clone, Debug)]
pub enum Recalibrated<D> {
    Applied(RecalibratedDensity<D>),
    /// The correction could not be normalized; the base density is returned.
    Rejected {
        base: D,
        reason: String,
    },
}

impl<D: PredictiveDensity> Recalibrated<D> {
    pub fn is_applied(&self) -> bool {
        matches!(self, Recalibrated::Applied(_))
    }

    pub fn density(&self) -> &dyn PredictiveDensity {
        match self {
            Recalibrated::Applied(r) => r,
            Recalibrated::Rejected { base, .. } => base,
        }
    }
}

impl<D: PredictiveDensity> PredictiveDensity for Recalibrated<D> {
    fn pdf(&self, y: f64) -> f64 {
        self.density().pdf(y)
    }

    fn cdf(&self, y: f64) -> f64 {
        self.density().cdf(y)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        self.density().quantile(p)
    }

    fn hints(&self) -> Vec<Hint> {
        self.density().hints()
    }
}

/// Applies a fixed monotone map to `density`.
pub fn apply_beta<D: PredictiveDensity>(density: D, beta: BetaHat) -> Recalibrated<D> {
    let normalizer = beta.total_mass();
    if !(normalizer >= MIN_NORMALIZER) {
        return Recalibrated::Rejected { base: density, reason: format!("normalizer {normalizer:e} below {MIN_NORMALIZER:e}") };
    }
    Recalibrated::Applied(RecalibratedDensity { base: density, beta, normalizer })
}

/// `c(F̂(y)) p̂(y) / Z` with `c = β'` fitted at `x`.
pub fn recalibrate_density<D: PredictiveDensity>(density: D, model: &RecalibrationModel, x: &[f64]) -> Result<Recalibrated<D>> {
    Ok(apply_beta(density, beta_hat(model, x)?))
}

impl RecalibrationModel {
    pub fn to_json(&self) -> Result<String> {
        let env = Envelope { format: RECAL_FORMAT.into(), version: RECAL_FORMAT_VERSION, model: self.clone() };
        Ok(serde_json::to_string_pretty(&env)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: Envelope = serde_json::from_str(s)?;
        if env.format != RECAL_FORMAT || env.version != RECAL_FORMAT_VERSION {
            return Err(Error::input(format!("unsupported recalibration file {} v{}", env.format, env.version)));
        }
        Ok(env.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests;
