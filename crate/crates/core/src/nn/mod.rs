//! Trainable layers built on the autodiff tape.

mod attention;
mod conv;
mod kan;
mod linear;
mod mlp;
mod norm;

pub use attention::MultiHeadAttention;
pub use conv::Conv1dBlock;
pub use kan::{rbf_features, RbfGrid, RbfKanLayer};
pub use linear::Linear;
pub use mlp::MlpBlock;
pub use norm::LayerNorm;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Graph, Var};
use crate::error::Result;
use crate::param::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// State for one forward pass: a fresh tape, read access to the
/// parameters, and the dropout RNG when training.
pub struct Ctx<'s> {
    pub graph: Graph,
    store: &'s ParamStore,
    rng: Option<&'s mut ChaCha8Rng>,
}

impl<'s> Ctx<'s> {
    /// Inference mode: dropout disabled.
    pub fn eval(store: &'s ParamStore) -> Self {
        Ctx {
            graph: Graph::new(),
            store,
            rng: None,
        }
    }

    /// Training mode: dropout masks drawn from `rng`.
    pub fn train(store: &'s ParamStore, rng: &'s mut ChaCha8Rng) -> Self {
        Ctx {
            graph: Graph::new(),
            store,
            rng: Some(rng),
        }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.graph.param(self.store, id)
    }

    pub fn input(&mut self, t: Tensor) -> Result<Var> {
        self.graph.constant(t)
    }

    /// Inverted dropout; identity in eval mode or when `rate == 0`.
    pub fn dropout(&mut self, x: Var, rate: f64) -> Result<Var> {
        let Some(rng) = self.rng.as_deref_mut() else {
            return Ok(x);
        };
        if rate <= 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - rate;
        let shape = self.graph.shape(x).to_vec();
        let n: usize = shape.iter().product();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let m = self.graph.constant(Tensor::new(&shape, mask)?)?;
        self.graph.mul(x, m)
    }
}

/// Uniform initialization in `±1/sqrt(fan_in)`.
pub(crate) fn init_uniform(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, 1.0 / (fan_in as f64).sqrt(), rng)
}
