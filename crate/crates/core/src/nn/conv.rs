use rand_chacha::ChaCha8Rng;

use super::{init_uniform, Ctx};
use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Single-channel convolution along the feature axis, zero padded so the
/// output length equals the input length.
#[derive(Debug, Clone)]
pub struct Conv1dBlock {
    pub kernel_size: usize,
    pub kernel: ParamId,
    pub bias: ParamId,
}

impl Conv1dBlock {
    pub fn new(store: &mut ParamStore, name: &str, kernel_size: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if kernel_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "{name}: kernel size must be odd for same-length padding, got {kernel_size}"
            )));
        }
        Ok(Conv1dBlock {
            kernel_size,
            kernel: store.add(
                format!("{name}.kernel"),
                init_uniform(&[kernel_size], kernel_size, rng),
            )?,
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[1]))?,
        })
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let k = ctx.param(self.kernel);
        let b = ctx.param(self.bias);
        let y = ctx.graph.conv1d_same(x, k)?;
        ctx.graph.add(y, b)
    }
}
