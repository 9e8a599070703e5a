use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tail::{self, SampleWeights};

/// Architecture and training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MdnConfig {
    /// Number of conditioning lags.
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub n_mixtures: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Standard deviation of the Gaussian noise added to inputs and targets.
    /// `None` selects 0.1 times the robust scale of the training targets.
    pub noise_std: Option<f64>,
    pub horizon: usize,
    pub seed: u64,
    /// Pins every component's ξ to this value and stops its gradient.
    pub frozen_xi: Option<f64>,
    /// Pins every component's ν to this value and stops its gradient.
    pub frozen_nu: Option<f64>,
}

impl Default for MdnConfig {
    fn default() -> Self {
        Self {
            input_dim: 1,
            hidden: vec![64, 64],
            n_mixtures: 10,
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 128,
            noise_std: None,
            horizon: 1,
            seed: 0,
            frozen_xi: None,
            frozen_nu: None,
        }
    }
}

impl MdnConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("input_dim", self.input_dim),
            ("n_mixtures", self.n_mixtures),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("horizon", self.horizon),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::input(format!("{name} must be at least 1")));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::input("hidden layer sizes must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if let Some(s) = self.noise_std {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::input(format!("noise_std must be >= 0, got {s}")));
            }
        }
        if let Some(nu) = self.frozen_nu {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::input(format!("frozen_nu must be > 0, got {nu}")));
            }
        }
        if let Some(xi) = self.frozen_xi {
            if !xi.is_finite() {
                return Err(Error::input("frozen_xi must be finite"));
            }
        }
        Ok(())
    }
}

/// Aligned conditioning vectors, targets and sample weights.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub weights: SampleWeights,
}

impl TrainingSet {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>, weights: SampleWeights) -> Result<Self> {
        if inputs.len() != targets.len() || weights.weights.len() != targets.len() {
            return Err(Error::input(format!(
                "misaligned training set: {} inputs, {} targets, {} weights",
                inputs.len(),
                targets.len(),
                weights.weights.len()
            )));
        }
        if let Some(d) = inputs.first().map(Vec::len) {
            if inputs.iter().any(|x| x.len() != d) {
                return Err(Error::input("conditioning vectors differ in length"));
            }
        }
        if let Some(i) = (0..targets.len()).find(|i| !targets[*i].is_finite() || inputs[*i].iter().any(|v| !v.is_finite())) {
            return Err(Error::numeric(Some(i), "non-finite training value"));
        }
        if weights.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::input("sample weights must be finite and nonnegative"));
        }
        Ok(Self { inputs, targets, weights })
    }

    /// Pairs `((X_{t-d+1}, …, X_t), X_{t+h})` from a series. With `delta`,
    /// observations whose conditioning value `X_t` lies outside the fitted
    /// tail bounds get the tail weight; otherwise all weights are 1.
    pub fn from_series(series: &[f64], input_dim: usize, horizon: usize, delta: Option<f64>) -> Result<Self> {
        if input_dim == 0 || horizon == 0 {
            return Err(Error::input("input_dim and horizon must be at least 1"));
        }
        if series.len() < input_dim + horizon + 1 {
            return Err(Error::input("series too short for the requested lags and horizon"));
        }
        let n = series.len() - input_dim - horizon + 1;
        let inputs: Vec<Vec<f64>> = (0..n).map(|i| series[i..i + input_dim].to_vec()).collect();
        let targets: Vec<f64> = (0..n).map(|i| series[i + input_dim - 1 + horizon]).collect();
        let weights = match delta {
            Some(d) => {
                let bounds = tail::fit_tail_bounds(series, d)?;
                let cond: Vec<f64> = inputs.iter().map(|x| x[input_dim - 1]).collect();
                tail::compute_weights(&cond, &bounds)?
            }
            None => SampleWeights::uniform(n),
        };
        Self::new(inputs, targets, weights)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Rows at `idx`, with their weights, as a new set.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let weights: Vec<f64> = idx.iter().map(|i| self.weights.weights[*i]).collect();
        let tail_mask: Vec<bool> = idx.iter().map(|i| self.weights.tail_mask[*i]).collect();
        let n_tail = tail_mask.iter().filter(|t| **t).count();
        Self {
            inputs: idx.iter().map(|i| self.inputs[*i].clone()).collect(),
            targets: idx.iter().map(|i| self.targets[*i]).collect(),
            weights: SampleWeights { weights, tail_mask, n_total: idx.len(), n_tail, warning: None },
        }
    }
}
