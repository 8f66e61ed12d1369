use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{clip_grad_norm, AdamConfig, AdamState};
use super::loss::mse_loss;
use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::model::Forecaster;
use crate::nn::Ctx;
use crate::tensor::Tensor;

/// Epoch loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: AdamConfig,
    /// Max global gradient norm; off when `None`.
    pub grad_clip: Option<f64>,
    /// Per-epoch multiplicative learning-rate decay; off when `None`.
    pub lr_decay: Option<f64>,
    pub shuffle: bool,
    /// Cap on optimizer steps per epoch, for reduced runs.
    pub max_batches_per_epoch: Option<usize>,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            max_epochs: 30,
            patience: 3,
            batch_size: 32,
            seed: 2024,
            optimizer: AdamConfig::default(),
            grad_clip: None,
            lr_decay: None,
            shuffle: true,
            max_batches_per_epoch: None,
        }
    }
}

impl TrainSchedule {
    /// Starting points for common benchmark datasets, matched by
    /// case-insensitive name prefix. Traffic uses batch 16 and Weather 64.
    /// The ETT sets are small, so they get batch 32 and the lower Adam rate.
    /// Anything else gets the defaults.
    pub fn preset(dataset: &str) -> Self {
        let name = dataset.to_ascii_lowercase();
        let base = Self::default();
        if name.starts_with("traffic") {
            TrainSchedule { batch_size: 16, ..base }
        } else if name.starts_with("weather") {
            TrainSchedule { batch_size: 64, ..base }
        } else if name.starts_with("ett") {
            TrainSchedule {
                optimizer: AdamConfig::small_dataset(),
                ..base
            }
        } else {
            base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        let o = &self.optimizer;
        if !(o.lr >= 0.0 && o.lr.is_finite()) {
            return bad(format!("learning rate must be finite and >= 0, got {}", o.lr));
        }
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || o.eps <= 0.0 {
            return bad("Adam betas must lie in [0, 1) and eps must be positive".into());
        }
        if self.grad_clip.is_some_and(|c| c <= 0.0 || !c.is_finite()) {
            return bad("grad_clip must be positive".into());
        }
        if self.lr_decay.is_some_and(|d| d <= 0.0 || d > 1.0) {
            return bad("lr_decay must lie in (0, 1]".into());
        }
        if self.max_batches_per_epoch == Some(0) {
            return bad("max_batches_per_epoch must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

/// Outcome of one training run. Wall time is kept out of the serialized
/// form so that reports from identical runs compare byte-for-byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_epoch: usize,
    pub early_stopped: bool,
    pub steps: u64,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl TrainReport {
    pub fn initial_val_loss(&self) -> f64 {
        self.epochs.first().map_or(f64::NAN, |e| e.val_loss)
    }

    pub fn final_val_loss(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.val_loss)
    }
}

fn batches(n: usize, schedule: &TrainSchedule, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    if schedule.shuffle {
        order.shuffle(rng);
    }
    let mut out: Vec<Vec<usize>> = order.chunks(schedule.batch_size).map(<[usize]>::to_vec).collect();
    if let Some(cap) = schedule.max_batches_per_epoch {
        out.truncate(cap);
    }
    out
}

fn as_divergence(epoch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { op } => Error::Divergence {
            epoch,
            detail: format!("non-finite value in {op}"),
        },
        other => other,
    }
}

/// Mean MSE over every window of `windows`, in eval mode.
pub fn evaluate_loss<M: Forecaster>(model: &M, windows: &WindowSet, batch_size: usize) -> Result<f64> {
    let (pred, target) = predict_windows(model, windows, batch_size)?;
    let n = pred.len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / n)
}

/// Eval-mode predictions for every window, as `([W, N, F], [W, N, F])`.
pub fn predict_windows<M: Forecaster>(model: &M, windows: &WindowSet, batch_size: usize) -> Result<(Tensor, Tensor)> {
    if windows.is_empty() {
        return Err(Error::Data("no windows to evaluate".into()));
    }
    let idx: Vec<usize> = (0..windows.len()).collect();
    let mut preds = Vec::new();
    let mut targets = Vec::new();
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, y) = windows.batch(chunk)?;
        let p = model.predict(&x)?;
        if p.shape() != y.shape() {
            return Err(Error::shape("predict_windows", p.shape(), y.shape()));
        }
        preds.extend_from_slice(p.data());
        targets.extend_from_slice(y.data());
    }
    let shape = [windows.len(), windows.n_vars(), windows.horizon];
    Ok((Tensor::new(&shape, preds)?, Tensor::new(&shape, targets)?))
}

/// Trains with Adam and early stopping on validation MSE, then restores
/// the best-validation weights.
pub fn train<M: Forecaster>(model: &mut M, train: &WindowSet, val: &WindowSet, schedule: &TrainSchedule) -> Result<TrainReport> {
    train_with_hook(model, train, val, schedule, |_, v| v)
}

/// As [`train`], but the measured validation loss of each epoch is passed
/// through `val_hook(epoch, loss)` before the stopping rule sees it.
pub fn train_with_hook<M, H>(
    model: &mut M,
    train: &WindowSet,
    val: &WindowSet,
    schedule: &TrainSchedule,
    mut val_hook: H,
) -> Result<TrainReport>
where
    M: Forecaster,
    H: FnMut(usize, f64) -> f64,
{
    schedule.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Data("training needs non-empty train and validation splits".into()));
    }
    let start = Instant::now();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(schedule.seed.wrapping_add(1));
    let mut adam = AdamState::new(schedule.optimizer, model.store());
    model.store_mut().zero_grads();

    let mut epochs = Vec::new();
    let mut best = (0usize, f64::INFINITY);
    let mut best_weights = model.store().snapshot();
    let mut since_best = 0usize;
    let mut early_stopped = false;

    for epoch in 1..=schedule.max_epochs {
        let mut loss_sum = 0.0;
        let plan = batches(train.len(), schedule, &mut shuffle_rng);
        for idx in &plan {
            let (x, y) = train.batch(idx)?;
            let (loss, grads) = {
                let mut ctx = Ctx::train(model.store(), &mut dropout_rng);
                let step = (|| {
                    let xv = ctx.input(x)?;
                    let pred = model.forward(&mut ctx, xv)?;
                    let yv = ctx.input(y)?;
                    let loss = mse_loss(&mut ctx.graph, pred, yv)?;
                    let grads = ctx.graph.backward(loss)?;
                    Ok((ctx.graph.value(loss).data()[0], grads))
                })();
                step.map_err(|e| as_divergence(epoch, e))?
            };
            grads.accumulate_into(model.store_mut());
            if let Some(c) = schedule.grad_clip {
                clip_grad_norm(model.store_mut(), c);
            }
            adam.step(model.store_mut()).map_err(|e| as_divergence(epoch, e))?;
            loss_sum += loss;
        }
        let train_loss = loss_sum / plan.len() as f64;
        let measured = evaluate_loss(model, val, schedule.batch_size).map_err(|e| as_divergence(epoch, e))?;
        let val_loss = val_hook(epoch, measured);
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: "validation loss is not finite".into(),
            });
        }
        info!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr: adam.config.lr,
        });
        if val_loss < best.1 {
            best = (epoch, val_loss);
            best_weights = model.store().snapshot();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= schedule.patience {
                early_stopped = true;
                break;
            }
        }
        if let Some(d) = schedule.lr_decay {
            adam.config.lr *= d;
        }
    }
    model.store_mut().restore(&best_weights)?;
    Ok(TrainReport {
        stopped_epoch: epochs.len(),
        epochs,
        best_epoch: best.0,
        best_val_loss: best.1,
        early_stopped,
        steps: adam.t,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        assert_eq!(TrainSchedule::preset("Traffic").batch_size, 16);
        assert_eq!(TrainSchedule::preset("weather.csv").batch_size, 64);
        let ett = TrainSchedule::preset("ETTh1");
        assert_eq!((ett.batch_size, ett.optimizer.lr), (32, 0.002));
        assert_eq!(TrainSchedule::preset("solar"), TrainSchedule::default());
        for name in ["traffic", "weather", "ettm2", "other"] {
            TrainSchedule::preset(name).validate().unwrap();
        }
    }
}
