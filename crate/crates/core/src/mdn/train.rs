use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{MdnConfig, TrainingSet};
use super::model::MdnModel;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats;
use crate::tail::WeightedSampler;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const MAX_HALVINGS: usize = 3;

/// Loss summary of one epoch.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_time_s: f64,
    pub learning_rate: f64,
    pub validation_loss: Option<f64>,
}

/// Per-epoch training history.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub lr_halvings: usize,
    pub noise_std: f64,
}

impl TrainingLog {
    /// CSV with columns `epoch,mean_loss,wall_time_s`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "epoch,mean_loss,wall_time_s")?;
        for e in &self.epochs {
            writeln!(f, "{},{:?},{:.6}", e.epoch, e.mean_loss, e.wall_time_s)?;
        }
        f.flush()?;
        Ok(())
    }
}

#[derive(Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * grad[i];
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Runs one epoch; `Err` carries the failing batch's diagnostic.
#[allow(clippy::too_many_arguments)]
fn run_epoch(
    model: &mut MdnModel,
    adam: &mut Adam,
    data: &TrainingSet,
    sampler: &WeightedSampler,
    noise_std: f64,
    lr: f64,
    epoch: usize,
    grad: &mut [f64],
) -> Result<f64> {
    let cfg = model.config.clone();
    let n_batches = data.len().div_ceil(cfg.batch_size);
    let mut rng = rng::stream(cfg.seed, 1 + epoch as u64);
    let mut total = 0.0;
    let mut xs_buf: Vec<Vec<f64>> = vec![vec![0.0; cfg.input_dim]; cfg.batch_size];
    let mut ys = vec![0.0; cfg.batch_size];
    let mut ws = vec![0.0; cfg.batch_size];
    for _ in 0..n_batches {
        let idx = sampler.batch(cfg.batch_size, &mut rng);
        for (b, &i) in idx.iter().enumerate() {
            for (d, v) in xs_buf[b].iter_mut().enumerate() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *v = data.inputs[i][d] + noise_std * e;
            }
            let e: f64 = StandardNormal.sample(&mut rng);
            ys[b] = data.targets[i] + noise_std * e;
            ws[b] = data.weights.weights[i];
        }
        let xs: Vec<&[f64]> = xs_buf.iter().map(Vec::as_slice).collect();
        let loss = model.loss_grad(&xs, &ys, &ws, Some(grad))?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric(None, format!("non-finite loss {loss} in epoch {}", epoch + 1)));
        }
        adam.step(&mut model.params, grad, lr);
        total += loss;
    }
    Ok(total / n_batches as f64)
}

/// Trains a fresh model with weighted sampling, weighted loss, input and
/// target noise, and Adam. A non-finite loss restores the start-of-epoch
/// checkpoint and halves the learning rate, at most three times.
pub fn train(data: &TrainingSet, cal_check: Option<&TrainingSet>, cfg: &MdnConfig) -> Result<(MdnModel, TrainingLog)> {
    cfg.validate()?;
    if data.len() < cfg.batch_size {
        return Err(Error::input(format!("training set has {} rows, fewer than batch_size {}", data.len(), cfg.batch_size)));
    }
    if data.inputs[0].len() != cfg.input_dim {
        return Err(Error::input("conditioning vectors do not match input_dim"));
    }
    let mut model = MdnModel::init_for(cfg.clone(), data)?;
    let noise_std = match cfg.noise_std {
        Some(s) => s,
        None => 0.1 * stats::robust_scale(&data.targets)?,
    };
    let sampler = WeightedSampler::new(&data.weights.weights)?;
    let mut adam = Adam::new(model.n_params());
    let mut grad = vec![0.0; model.n_params()];
    let mut lr = cfg.learning_rate;
    let mut log = TrainingLog { noise_std, ..Default::default() };
    let start = Instant::now();
    let mut epoch = 0;
    while epoch < cfg.epochs {
        let checkpoint = (model.params.clone(), adam.clone());
        match run_epoch(&mut model, &mut adam, data, &sampler, noise_std, lr, epoch, &mut grad) {
            Ok(mean_loss) => {
                let validation_loss = match cal_check {
                    Some(v) => Some(super::model::weighted_nll(&model, v)?),
                    None => None,
                };
                log.epochs.push(EpochRecord { epoch: epoch + 1, mean_loss, wall_time_s: start.elapsed().as_secs_f64(), learning_rate: lr, validation_loss });
                epoch += 1;
            }
            Err(Error::Numeric { index, message }) => {
                model.params = checkpoint.0;
                adam = checkpoint.1;
                if log.lr_halvings == MAX_HALVINGS {
                    return Err(Error::Numeric {
                        index,
                        message: format!("training diverged after {MAX_HALVINGS} learning-rate halvings (last lr {lr}): {message}"),
                    });
                }
                lr *= 0.5;
                log.lr_halvings += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((model, log))
}
