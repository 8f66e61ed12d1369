//! Forecast error metrics: MSE, MAE, RMSE, RSE and MAPE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Targets with magnitude below this are left out of the MAPE mean.
pub const MAPE_ZERO_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when the target is constant (zero denominator).
    pub rse: Option<f64>,
    /// Fraction, not percent. `None` when every target is near zero.
    pub mape: Option<f64>,
    pub mape_excluded: usize,
    pub count: usize,
}

pub fn metrics(pred: &Tensor, target: &Tensor) -> Result<Metrics> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("metrics", pred.shape(), target.shape()));
    }
    metrics_slices(pred.data(), target.data())
}

pub fn metrics_slices(pred: &[f64], target: &[f64]) -> Result<Metrics> {
    if pred.len() != target.len() {
        return Err(Error::shape("metrics", &[pred.len()], &[target.len()]));
    }
    if pred.is_empty() {
        return Err(Error::Data("metrics of an empty prediction set".into()));
    }
    let n = pred.len() as f64;
    let target_mean = target.iter().sum::<f64>() / n;

    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut dev = 0.0;
    let mut ape = 0.0;
    let mut ape_count = 0usize;
    for (&p, &y) in pred.iter().zip(target) {
        let e = y - p;
        sq += e * e;
        abs += e.abs();
        dev += (y - target_mean) * (y - target_mean);
        if y.abs() >= MAPE_ZERO_THRESHOLD {
            ape += (e / y).abs();
            ape_count += 1;
        }
    }
    let mse = sq / n;
    Ok(Metrics {
        mse,
        mae: abs / n,
        rmse: mse.sqrt(),
        rse: (dev > 0.0).then(|| sq.sqrt() / dev.sqrt()),
        mape: (ape_count > 0).then(|| ape / ape_count as f64),
        mape_excluded: pred.len() - ape_count,
        count: pred.len(),
    })
}
