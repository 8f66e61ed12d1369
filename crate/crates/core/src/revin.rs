//! Reversible instance normalization.
//!
//! Each series in a batch is standardized per variate with its own lookback
//! statistics (population variance, std clamped below at `eps`), optionally
//! followed by a learnable per-variate affine map. The prediction head's
//! output is mapped back with the same statistics.

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::nn::Ctx;
use crate::param::{ParamId, ParamStore};
use crate::tensor::Tensor;

pub const REVIN_EPS: f64 = 1e-5;

/// Per-instance, per-variate statistics, each `[B, N, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RevinState {
    pub mean: Tensor,
    pub std: Tensor,
}

impl RevinState {
    /// Statistics of `x: [B, N, L]` over the last axis.
    pub fn from_input(x: &Tensor, eps: f64) -> Result<Self> {
        let shape = x.shape();
        if shape.len() != 3 {
            return Err(Error::invalid("revin", format!("expected [B, N, L], got {shape:?}")));
        }
        let (b, n, l) = (shape[0], shape[1], shape[2]);
        if l < 2 {
            return Err(Error::invalid("revin", format!("lookback length {l} < 2")));
        }
        let mut mean = Vec::with_capacity(b * n);
        let mut std = Vec::with_capacity(b * n);
        for row in x.data().chunks(l) {
            let m = row.iter().sum::<f64>() / l as f64;
            let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / l as f64;
            mean.push(m);
            std.push(var.sqrt().max(eps));
        }
        Ok(RevinState {
            mean: Tensor::new(&[b, n, 1], mean)?,
            std: Tensor::new(&[b, n, 1], std)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Revin {
    pub n_vars: usize,
    pub eps: f64,
    /// `(gamma, beta)`, each `[N]`.
    pub affine: Option<(ParamId, ParamId)>,
}

impl Revin {
    pub fn new(store: &mut ParamStore, name: &str, n_vars: usize, affine: bool) -> Result<Self> {
        let affine = if affine {
            Some((
                store.add(format!("{name}.gamma"), Tensor::ones(&[n_vars]))?,
                store.add(format!("{name}.beta"), Tensor::zeros(&[n_vars]))?,
            ))
        } else {
            None
        };
        Ok(Revin {
            n_vars,
            eps: REVIN_EPS,
            affine,
        })
    }

    fn check_vars(&self, op: &'static str, shape: &[usize]) -> Result<()> {
        if shape.len() != 3 || shape[1] != self.n_vars {
            return Err(Error::shape(op, shape, &[0, self.n_vars, 0]));
        }
        Ok(())
    }

    fn affine_vars(&self, ctx: &mut Ctx) -> Result<Option<(Var, Var)>> {
        let Some((gamma, beta)) = self.affine else {
            return Ok(None);
        };
        let g = ctx.param(gamma);
        let b = ctx.param(beta);
        let g = ctx.graph.reshape(g, &[self.n_vars, 1])?;
        let b = ctx.graph.reshape(b, &[self.n_vars, 1])?;
        Ok(Some((g, b)))
    }

    /// `x: [B, N, L]` -> normalized `[B, N, L]` plus the statistics needed to
    /// invert it. The statistics are treated as constants by the tape.
    pub fn normalize(&self, ctx: &mut Ctx, x: Var) -> Result<(Var, RevinState)> {
        self.check_vars("revin.normalize", ctx.graph.shape(x))?;
        let state = RevinState::from_input(ctx.graph.value(x), self.eps)?;
        let mean = ctx.graph.constant(state.mean.clone())?;
        let std = ctx.graph.constant(state.std.clone())?;
        let centered = ctx.graph.sub(x, mean)?;
        let mut out = ctx.graph.div(centered, std)?;
        if let Some((gamma, beta)) = self.affine_vars(ctx)? {
            out = ctx.graph.mul(out, gamma)?;
            out = ctx.graph.add(out, beta)?;
        }
        Ok((out, state))
    }

    /// `y: [B, N, F]` back to the input scale.
    pub fn denormalize(&self, ctx: &mut Ctx, y: Var, state: &RevinState) -> Result<Var> {
        let shape = ctx.graph.shape(y).to_vec();
        self.check_vars("revin.denormalize", &shape)?;
        if shape[..2] != state.mean.shape()[..2] {
            return Err(Error::shape("revin.denormalize", &shape, state.mean.shape()));
        }
        let mut out = y;
        if let Some((gamma, beta)) = self.affine_vars(ctx)? {
            out = ctx.graph.sub(out, beta)?;
            let denom = ctx.graph.add_scalar(gamma, self.eps * self.eps)?;
            out = ctx.graph.div(out, denom)?;
        }
        let std = ctx.graph.constant(state.std.clone())?;
        let mean = ctx.graph.constant(state.mean.clone())?;
        out = ctx.graph.mul(out, std)?;
        ctx.graph.add(out, mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run_normalize(revin: &Revin, store: &ParamStore, x: Tensor) -> (Tensor, RevinState) {
        let mut ctx = Ctx::eval(store);
        let v = ctx.input(x).unwrap();
        let (out, state) = revin.normalize(&mut ctx, v).unwrap();
        (ctx.graph.value(out).clone(), state)
    }

    #[test]
    fn constant_series_maps_to_zero() {
        let mut store = ParamStore::new();
        let revin = Revin::new(&mut store, "revin", 1, true).unwrap();
        let (out, state) = run_normalize(&revin, &store, Tensor::full(&[1, 1, 6], 3.5));
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert_eq!(state.std.data(), &[REVIN_EPS]);
    }

    #[test]
    fn standardized_input_unchanged() {
        let mut store = ParamStore::new();
        let revin = Revin::new(&mut store, "revin", 1, true).unwrap();
        let (out, _) = run_normalize(&revin, &store, Tensor::new(&[1, 1, 2], vec![-1.0, 1.0]).unwrap());
        assert_eq!(out.data(), &[-1.0, 1.0]);
    }

    #[test]
    fn too_short_lookback_rejected() {
        let store = ParamStore::new();
        let revin = Revin {
            n_vars: 1,
            eps: REVIN_EPS,
            affine: None,
        };
        let mut ctx = Ctx::eval(&store);
        let v = ctx.input(Tensor::zeros(&[1, 1, 1])).unwrap();
        assert!(revin.normalize(&mut ctx, v).is_err());
    }

    #[test]
    fn denormalize_inverts_known_state() {
        let store = ParamStore::new();
        let revin = Revin {
            n_vars: 1,
            eps: REVIN_EPS,
            affine: None,
        };
        let state = RevinState {
            mean: Tensor::full(&[1, 1, 1], 5.0),
            std: Tensor::full(&[1, 1, 1], 2.0),
        };
        let mut ctx = Ctx::eval(&store);
        let y = ctx.input(Tensor::zeros(&[1, 1, 3])).unwrap();
        let out = revin.denormalize(&mut ctx, y, &state).unwrap();
        assert_eq!(ctx.graph.value(out).data(), &[5.0; 3]);
        let bad = ctx.input(Tensor::zeros(&[2, 1, 3])).unwrap();
        assert!(revin.denormalize(&mut ctx, bad, &state).is_err());
    }

    #[test]
    fn shift_invariance() {
        let mut store = ParamStore::new();
        let revin = Revin::new(&mut store, "revin", 3, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Tensor::uniform(&[2, 3, 10], 4.0, &mut rng);
        let shifted = x.map(|v| v + 123.0);
        let (a, _) = run_normalize(&revin, &store, x);
        let (b, _) = run_normalize(&revin, &store, shifted);
        assert!(a.max_abs_diff(&b).unwrap() < 1e-9);
    }
}
