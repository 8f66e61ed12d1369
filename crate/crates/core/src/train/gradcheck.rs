use serde::{Deserialize, Serialize};

use super::loss::mse_loss;
use crate::autograd::Var;
use crate::error::Result;
use crate::model::Forecaster;
use crate::nn::Ctx;
use crate::param::ParamStore;
use crate::tensor::Tensor;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for the relative error. Below it a coordinate is
/// judged by absolute error (tolerance * floor), since central differences
/// at step 1e-5 carry ~1e-10 of round-off that would otherwise dominate
/// gradients near zero.
pub const REL_ERR_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub max_rel_err: f64,
    /// `name[index]` of the worst coordinate.
    pub worst: String,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub coordinates: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares backprop gradients of `loss_fn` against central differences
/// over every trainable coordinate of `store`. `loss_fn` must build a
/// scalar on the context it is given and be deterministic.
pub fn grad_check_fn<F>(store: &mut ParamStore, loss_fn: F, tolerance: f64) -> Result<CheckReport>
where
    F: Fn(&mut Ctx) -> Result<Var>,
{
    let analytic: Vec<Tensor> = {
        let mut ctx = Ctx::eval(store);
        let loss = loss_fn(&mut ctx)?;
        let grads = ctx.graph.backward(loss)?;
        let mut scratch = store.clone();
        scratch.zero_grads();
        grads.accumulate_into(&mut scratch);
        scratch.iter().map(|(_, p)| p.grad.clone()).collect()
    };
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut ctx = Ctx::eval(s);
        let loss = loss_fn(&mut ctx)?;
        Ok(ctx.graph.value(loss).data()[0])
    };

    let ids: Vec<_> = store.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
    let mut report = CheckReport {
        max_rel_err: 0.0,
        worst: String::new(),
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        coordinates: 0,
        tolerance,
        passed: true,
    };
    for id in ids {
        let index = store.iter().position(|(i, _)| i == id).expect("id from store");
        for k in 0..store.get(id).value.len() {
            let orig = store.get(id).value.data()[k];
            store.get_mut(id).value.data_mut()[k] = orig + FD_STEP;
            let plus = eval(store);
            store.get_mut(id).value.data_mut()[k] = orig - FD_STEP;
            let minus = eval(store);
            store.get_mut(id).value.data_mut()[k] = orig;
            let numeric = (plus? - minus?) / (2.0 * FD_STEP);
            let a = analytic[index].data()[k];
            let err = relative_error(a, numeric);
            report.coordinates += 1;
            if err > report.max_rel_err || report.worst.is_empty() {
                report.max_rel_err = err;
                report.worst = format!("{}[{k}]", store.get(id).name);
                report.analytic_at_worst = a;
                report.numeric_at_worst = numeric;
            }
        }
    }
    report.passed = report.max_rel_err < tolerance;
    Ok(report)
}

/// Gradient check of `mse(model(input), target)`.
pub fn grad_check<M: Forecaster + Clone>(model: &M, input: &Tensor, target: &Tensor, tolerance: f64) -> Result<CheckReport> {
    let mut store = model.store().clone();
    grad_check_fn(
        &mut store,
        |ctx| {
            let x = ctx.input(input.clone())?;
            let pred = model.forward(ctx, x)?;
            let y = ctx.input(target.clone())?;
            mse_loss(&mut ctx.graph, pred, y)
        },
        tolerance,
    )
}
