use rand::Rng as _;

use super::component::component_ln_pdf_grad;
use super::config::{MdnConfig, TrainingSet};
use crate::error::{Error, Result};
use crate::mixture::{Mixture, MixtureParams};
use crate::rng;
use crate::skewt::{SkewedTParams, NU_FLOOR, SIGMA_FLOOR};
use crate::stats;

pub(super) const N_HEADS: usize = 5;
const HEAD_PI: usize = 0;
const HEAD_MU: usize = 1;
const HEAD_SIGMA: usize = 2;
const HEAD_XI: usize = 3;
const HEAD_NU: usize = 4;
const INIT_NU: f64 = 5.0;
/// Output heads start with weights shrunk by this factor.
const HEAD_INIT_SCALE: f64 = 0.1;

#[inline]
fn softplus(a: f64) -> f64 {
    if a > 30.0 {
        a
    } else {
        a.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

fn softplus_inv(v: f64) -> f64 {
    if v > 30.0 {
        v
    } else {
        v.exp_m1().ln()
    }
}

/// Offsets of each dense layer inside the flat parameter vector.
#[derive(Clone, Debug)]
pub(super) struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub w: usize,
    pub b: usize,
}

pub(super) fn layout(cfg: &MdnConfig) -> (Vec<Layer>, Vec<Layer>, usize) {
    let mut off = 0;
    let mut dense = |rows: usize, cols: usize| {
        let l = Layer { rows, cols, w: off, b: off + rows * cols };
        off += rows * cols + rows;
        l
    };
    let mut hidden = Vec::new();
    let mut width = cfg.input_dim;
    for h in &cfg.hidden {
        hidden.push(dense(*h, width));
        width = *h;
    }
    let heads = (0..N_HEADS).map(|_| dense(cfg.n_mixtures, width)).collect();
    (hidden, heads, off)
}

/// Network weights, robust-scaling constants and configuration.
///
/// Inputs are scaled by their training median and IQR. Targets are scaled
/// the same way internally: the μ head predicts in scaled units and σ is
/// multiplied back, so the mixture is always returned in data units.
#[derive(Clone, Debug)]
pub struct MdnModel {
    pub(super) config: MdnConfig,
    pub(super) params: Vec<f64>,
    pub(super) input_center: Vec<f64>,
    pub(super) input_scale: Vec<f64>,
    pub(super) target_center: f64,
    pub(super) target_scale: f64,
    pub(super) hidden: Vec<Layer>,
    pub(super) heads: Vec<Layer>,
}

/// Cached activations of one forward pass.
pub(super) struct Trace {
    /// Scaled input followed by each hidden layer's post-activation.
    acts: Vec<Vec<f64>>,
    /// Raw head outputs, `N_HEADS × K`.
    raw: Vec<f64>,
}

impl MdnModel {
    /// A freshly initialized model for data with the given scaling.
    ///
    /// Weights are He-uniform with the configured seed, shrunk by a factor
    /// of ten on the output heads. Biases put the
    /// initial σ near the target robust scale, ν near 5 and spread the
    /// component locations over one IQR around the median.
    pub fn init(config: MdnConfig, input_center: Vec<f64>, input_scale: Vec<f64>, target_center: f64, target_scale: f64) -> Result<Self> {
        config.validate()?;
        if input_center.len() != config.input_dim || input_scale.len() != config.input_dim {
            return Err(Error::input("scaling vectors must match input_dim"));
        }
        if input_scale.iter().chain([&target_scale]).any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::input("scales must be finite and > 0"));
        }
        let (hidden, heads, n) = layout(&config);
        let mut params = vec![0.0; n];
        let mut rng = rng::stream(config.seed, 0);
        for (li, l) in hidden.iter().chain(&heads).enumerate() {
            let bound = (6.0 / l.cols as f64).sqrt() * if li >= hidden.len() { HEAD_INIT_SCALE } else { 1.0 };
            for p in &mut params[l.w..l.w + l.rows * l.cols] {
                *p = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        let k = config.n_mixtures;
        for j in 0..k {
            let spread = if k == 1 { 0.0 } else { -1.0 + 2.0 * j as f64 / (k - 1) as f64 };
            params[heads[HEAD_MU].b + j] = spread;
            params[heads[HEAD_SIGMA].b + j] = softplus_inv(1.0 / 1.349);
            params[heads[HEAD_NU].b + j] = softplus_inv(INIT_NU - NU_FLOOR);
        }
        Ok(Self { config, params, input_center, input_scale, target_center, target_scale, hidden, heads })
    }

    /// A model with every weight and bias zero.
    pub fn zeros(config: MdnConfig) -> Result<Self> {
        let d = config.input_dim;
        let mut m = Self::init(config, vec![0.0; d], vec![1.0; d], 0.0, 1.0)?;
        m.params.iter_mut().for_each(|p| *p = 0.0);
        Ok(m)
    }

    /// Scaling from training data: median and IQR per input column and for
    /// the targets.
    pub fn init_for(config: MdnConfig, data: &TrainingSet) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::input("empty training set"));
        }
        let scale_of = |v: &[f64]| -> Result<(f64, f64)> {
            let c = stats::median(v)?;
            let s = stats::iqr(v)?;
            Ok((c, if s > 0.0 { s } else { 1.0 }))
        };
        let mut ic = Vec::new();
        let mut is = Vec::new();
        for j in 0..config.input_dim {
            let col: Vec<f64> = data.inputs.iter().map(|x| x[j]).collect();
            let (c, s) = scale_of(&col)?;
            ic.push(c);
            is.push(s);
        }
        let (tc, ts) = scale_of(&data.targets)?;
        Self::init(config, ic, is, tc, ts)
    }

    pub fn config(&self) -> &MdnConfig {
        &self.config
    }

    /// Flat parameter vector; [`gradient`] uses the same layout.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub(super) fn trace(&self, x: &[f64]) -> Trace {
        let mut acts = Vec::with_capacity(self.hidden.len() + 1);
        acts.push(x.iter().zip(&self.input_center).zip(&self.input_scale).map(|((v, c), s)| (v - c) / s).collect::<Vec<_>>());
        for l in &self.hidden {
            let prev = acts.last().unwrap();
            let out: Vec<f64> = (0..l.rows)
                .map(|r| {
                    let row = &self.params[l.w + r * l.cols..l.w + (r + 1) * l.cols];
                    let pre = self.params[l.b + r] + row.iter().zip(prev).map(|(w, a)| w * a).sum::<f64>();
                    pre.max(0.0)
                })
                .collect();
            acts.push(out);
        }
        let last = acts.last().unwrap();
        let mut raw = Vec::with_capacity(N_HEADS * self.config.n_mixtures);
        for l in &self.heads {
            for r in 0..l.rows {
                let row = &self.params[l.w + r * l.cols..l.w + (r + 1) * l.cols];
                raw.push(self.params[l.b + r] + row.iter().zip(last).map(|(w, a)| w * a).sum::<f64>());
            }
        }
        Trace { acts, raw }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(Error::input(format!("expected {} conditioning values, got {}", self.config.input_dim, x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("conditioning values must be finite"));
        }
        Ok(())
    }

    /// Mixture parameters in data units from raw head outputs.
    pub(super) fn heads_to_params(&self, raw: &[f64]) -> MixtureParams {
        let k = self.config.n_mixtures;
        let logits = &raw[HEAD_PI * k..(HEAD_PI + 1) * k];
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        let weights: Vec<f64> = e.iter().map(|v| v / s).collect();
        let components = (0..k)
            .map(|j| {
                let mu = self.target_center + self.target_scale * raw[HEAD_MU * k + j];
                let sigma = self.target_scale * softplus(raw[HEAD_SIGMA * k + j]) + SIGMA_FLOOR;
                let xi = self.config.frozen_xi.unwrap_or(raw[HEAD_XI * k + j]);
                let nu = self.config.frozen_nu.unwrap_or_else(|| softplus(raw[HEAD_NU * k + j]) + NU_FLOOR);
                SkewedTParams { mu, sigma, xi, nu }
            })
            .collect();
        MixtureParams { weights, components }
    }

    /// Mixture parameters for conditioning vector `x`.
    pub fn forward(&self, x: &[f64]) -> Result<MixtureParams> {
        self.check_input(x)?;
        let p = self.heads_to_params(&self.trace(x).raw);
        if p.components.iter().any(|c| !(c.mu.is_finite() && c.sigma.is_finite() && c.xi.is_finite() && c.nu.is_finite()))
            || p.weights.iter().any(|w| !w.is_finite())
        {
            return Err(Error::numeric(None, "network produced non-finite mixture parameters"));
        }
        Ok(p)
    }

    /// Weighted loss and, optionally, its gradient over rows `(xs[i], ys[i], ws[i])`.
    pub(super) fn loss_grad(&self, xs: &[&[f64]], ys: &[f64], ws: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let wsum: f64 = ws.iter().sum();
        if xs.is_empty() || !(wsum > 0.0) {
            return Err(Error::input("batch must be nonempty with positive total weight"));
        }
        let k = self.config.n_mixtures;
        let ts = self.target_scale;
        let want_xi = self.config.frozen_xi.is_none();
        let want_nu = self.config.frozen_nu.is_none();
        let mut grad = grad;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut loss = 0.0;
        let mut comps = vec![Default::default(); k];
        let mut d_raw = vec![0.0; N_HEADS * k];
        for (i, x) in xs.iter().enumerate() {
            let omega = ws[i] / wsum;
            let tr = self.trace(x);
            let p = self.heads_to_params(&tr.raw);
            let mut lse_max = f64::NEG_INFINITY;
            let mut terms = vec![0.0; k];
            for j in 0..k {
                let c = &p.components[j];
                comps[j] = component_ln_pdf_grad(ys[i], c.mu, c.sigma, c.xi, c.nu, want_nu && grad.is_some());
                terms[j] = p.weights[j].ln() + comps[j].ln_pdf;
                lse_max = lse_max.max(terms[j]);
            }
            let ln_p = lse_max + terms.iter().map(|t| (t - lse_max).exp()).sum::<f64>().ln();
            if !ln_p.is_finite() {
                return Err(Error::numeric(Some(i), format!("non-finite log-density {ln_p}")));
            }
            loss -= omega * ln_p;
            let Some(g) = grad.as_deref_mut() else { continue };
            if omega == 0.0 {
                continue;
            }
            for j in 0..k {
                let gamma = (terms[j] - ln_p).exp();
                let c = &comps[j];
                d_raw[HEAD_PI * k + j] = omega * (p.weights[j] - gamma);
                d_raw[HEAD_MU * k + j] = -omega * gamma * c.d_mu * ts;
                d_raw[HEAD_SIGMA * k + j] = -omega * gamma * c.d_sigma * ts * sigmoid(tr.raw[HEAD_SIGMA * k + j]);
                d_raw[HEAD_XI * k + j] = if want_xi { -omega * gamma * c.d_xi } else { 0.0 };
                d_raw[HEAD_NU * k + j] = if want_nu { -omega * gamma * c.d_nu * sigmoid(tr.raw[HEAD_NU * k + j]) } else { 0.0 };
            }
            if d_raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(Some(i), "non-finite gradient"));
            }
            self.backward(&tr, &d_raw, g);
        }
        Ok(loss)
    }

    fn backward(&self, tr: &Trace, d_raw: &[f64], g: &mut [f64]) {
        let last = tr.acts.last().unwrap();
        let mut d_act = vec![0.0; last.len()];
        for (h, l) in self.heads.iter().enumerate() {
            for r in 0..l.rows {
                let d = d_raw[h * l.rows + r];
                if d == 0.0 {
                    continue;
                }
                g[l.b + r] += d;
                let row = l.w + r * l.cols;
                for c in 0..l.cols {
                    g[row + c] += d * last[c];
                    d_act[c] += d * self.params[row + c];
                }
            }
        }
        for (li, l) in self.hidden.iter().enumerate().rev() {
            let out = &tr.acts[li + 1];
            let inp = &tr.acts[li];
            let mut d_prev = vec![0.0; l.cols];
            for r in 0..l.rows {
                if out[r] <= 0.0 {
                    continue;
                }
                let d = d_act[r];
                g[l.b + r] += d;
                let row = l.w + r * l.cols;
                for c in 0..l.cols {
                    g[row + c] += d * inp[c];
                    d_prev[c] += d * self.params[row + c];
                }
            }
            d_act = d_prev;
        }
    }
}

fn rows(data: &TrainingSet) -> Vec<&[f64]> {
    data.inputs.iter().map(Vec::as_slice).collect()
}

/// `-(Σ w_t ln p(y_t | x_t)) / Σ w_t`.
pub fn weighted_nll(model: &MdnModel, batch: &TrainingSet) -> Result<f64> {
    model.loss_grad(&rows(batch), &batch.targets, &batch.weights.weights, None)
}

/// Loss and its exact gradient in the layout of [`MdnModel::params`].
pub fn gradient(model: &MdnModel, batch: &TrainingSet) -> Result<(f64, Vec<f64>)> {
    let mut g = vec![0.0; model.n_params()];
    let loss = model.loss_grad(&rows(batch), &batch.targets, &batch.weights.weights, Some(&mut g))?;
    Ok((loss, g))
}

/// The predictive mixture at `x`.
pub fn predict_density(model: &MdnModel, x: &[f64]) -> Result<Mixture> {
    Mixture::new(&model.forward(x)?)
}
