use rand_chacha::ChaCha8Rng;

use super::{init_uniform, Ctx};
use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// `y = x W + b` over the last axis. `W` is `[in_dim, out_dim]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let weight = store.add(
            format!("{name}.weight"),
            init_uniform(&[in_dim, out_dim], in_dim, rng),
        )?;
        let bias = if bias {
            Some(store.add(format!("{name}.bias"), Tensor::zeros(&[out_dim]))?)
        } else {
            None
        };
        Ok(Linear {
            in_dim,
            out_dim,
            weight,
            bias,
        })
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let shape = ctx.graph.shape(x);
        if shape.last() != Some(&self.in_dim) {
            return Err(Error::shape("linear", shape, &[self.in_dim, self.out_dim]));
        }
        let w = ctx.param(self.weight);
        let y = ctx.graph.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = ctx.param(b);
                ctx.graph.add(y, b)
            }
            None => Ok(y),
        }
    }
}
