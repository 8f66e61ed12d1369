use rand_chacha::ChaCha8Rng;

use super::{Ctx, Linear};
use crate::autograd::Var;
use crate::error::Result;
use crate::param::ParamStore;

/// linear -> GELU -> linear.
#[derive(Debug, Clone)]
pub struct MlpBlock {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl MlpBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(MlpBlock {
            fc1: Linear::new(store, &format!("{name}.fc1"), in_dim, hidden, true, rng)?,
            fc2: Linear::new(store, &format!("{name}.fc2"), hidden, out_dim, true, rng)?,
        })
    }

    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let h = self.fc1.forward(ctx, x)?;
        let h = ctx.graph.gelu(h)?;
        self.fc2.forward(ctx, h)
    }
}
