use super::Ctx;
use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Layer normalization over the last axis with learnable gain and shift.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub dim: usize,
    pub eps: f64,
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(LayerNorm {
            dim,
            eps: 1e-5,
            gamma: store.add(format!("{name}.gamma"), Tensor::ones(&[dim]))?,
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[dim]))?,
        })
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let shape = ctx.graph.shape(x).to_vec();
        if shape.last() != Some(&self.dim) {
            return Err(Error::shape("layer_norm", &shape, &[self.dim]));
        }
        let axis = shape.len() - 1;
        let g = &mut ctx.graph;
        let mean = g.mean_axis(x, axis)?;
        let centered = g.sub(x, mean)?;
        let sq = g.square(centered)?;
        let var = g.mean_axis(sq, axis)?;
        let var = g.add_scalar(var, self.eps)?;
        let std = g.sqrt(var)?;
        let normed = g.div(centered, std)?;
        let gamma = ctx.param(self.gamma);
        let beta = ctx.param(self.beta);
        let scaled = ctx.graph.mul(normed, gamma)?;
        ctx.graph.add(scaled, beta)
    }
}
