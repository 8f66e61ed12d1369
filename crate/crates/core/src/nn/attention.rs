use rand_chacha::ChaCha8Rng;

use super::{init_uniform, Ctx};
use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};

/// Multi-head scaled dot-product attention without masking or positional
/// information. Projections are bias-free `[model_dim, model_dim]` matrices.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub model_dim: usize,
    pub num_heads: usize,
    pub dropout: f64,
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
}

impl MultiHeadAttention {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        model_dim: usize,
        num_heads: usize,
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if num_heads == 0 || !model_dim.is_multiple_of(num_heads) {
            return Err(Error::Config(format!(
                "{name}: {num_heads} heads do not divide model dim {model_dim}"
            )));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!("{name}: dropout {dropout} outside [0, 1)")));
        }
        let mut proj = |suffix: &str| {
            store.add(
                format!("{name}.{suffix}"),
                init_uniform(&[model_dim, model_dim], model_dim, rng),
            )
        };
        Ok(MultiHeadAttention {
            model_dim,
            num_heads,
            dropout,
            wq: proj("wq")?,
            wk: proj("wk")?,
            wv: proj("wv")?,
            wo: proj("wo")?,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.num_heads
    }

    /// `q: [B, Sq, D]`, `k`/`v`: `[B, Skv, D]` -> `[B, Sq, D]`.
    pub fn forward(&self, ctx: &mut Ctx, q: Var, k: Var, v: Var) -> Result<Var> {
        self.forward_with_weights(ctx, q, k, v).map(|(out, _)| out)
    }

    /// Also returns the post-softmax weights `[B, H, Sq, Skv]` (before
    /// dropout).
    pub fn forward_with_weights(&self, ctx: &mut Ctx, q: Var, k: Var, v: Var) -> Result<(Var, Var)> {
        let (qs, ks, vs) = (
            ctx.graph.shape(q).to_vec(),
            ctx.graph.shape(k).to_vec(),
            ctx.graph.shape(v).to_vec(),
        );
        let d = self.model_dim;
        if qs.len() != 3 || qs[2] != d {
            return Err(Error::shape("attention(q)", &qs, &[qs.first().copied().unwrap_or(0), 0, d]));
        }
        if ks != vs || ks.len() != 3 || ks[2] != d || ks[0] != qs[0] {
            return Err(Error::shape("attention(k, v)", &ks, &vs));
        }
        let (b, sq, skv) = (qs[0], qs[1], ks[1]);
        let h = self.num_heads;
        let dh = self.head_dim();

        let wq = ctx.param(self.wq);
        let wk = ctx.param(self.wk);
        let wv = ctx.param(self.wv);
        let wo = ctx.param(self.wo);
        let g = &mut ctx.graph;

        let split_heads = |g: &mut crate::autograd::Graph, x: Var, s: usize| -> Result<Var> {
            let x = g.reshape(x, &[b, s, h, dh])?;
            g.permute(x, &[0, 2, 1, 3])
        };
        let qp = g.matmul(q, wq)?;
        let qh = split_heads(g, qp, sq)?;
        let kp = g.matmul(k, wk)?;
        let kh = split_heads(g, kp, skv)?;
        let vp = g.matmul(v, wv)?;
        let vh = split_heads(g, vp, skv)?;

        let kt = g.transpose(kh, 2, 3)?;
        let scores = g.matmul(qh, kt)?;
        let scores = g.scale(scores, 1.0 / (dh as f64).sqrt())?;
        let weights = g.softmax(scores, 3)?;
        let dropped = ctx.dropout(weights, self.dropout)?;
        let g = &mut ctx.graph;
        let ctxv = g.matmul(dropped, vh)?;
        let merged = g.permute(ctxv, &[0, 2, 1, 3])?;
        let merged = g.reshape(merged, &[b, sq, d])?;
        let out = g.matmul(merged, wo)?;
        Ok((out, weights))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;

    #[test]
    fn rejects_indivisible_heads() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(MultiHeadAttention::new(&mut store, "a", 6, 4, 0.0, &mut rng).is_err());
    }

    #[test]
    fn single_key_ignores_query() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mha = MultiHeadAttention::new(&mut store, "a", 4, 2, 0.0, &mut rng).unwrap();
        let kv = Tensor::uniform(&[1, 1, 4], 1.0, &mut rng);
        let mut outs = Vec::new();
        for _ in 0..2 {
            let mut ctx = Ctx::eval(&store);
            let q = ctx.input(Tensor::uniform(&[1, 3, 4], 5.0, &mut rng)).unwrap();
            let kvv = ctx.input(kv.clone()).unwrap();
            let out = mha.forward(&mut ctx, q, kvv, kvv).unwrap();
            outs.push(ctx.graph.value(out).clone());
        }
        // out = (v Wv) Wo for every query row.
        let expect = kv
            .matmul(store.value(mha.wv))
            .unwrap()
            .matmul(store.value(mha.wo))
            .unwrap();
        for out in outs {
            for row in out.data().chunks(4) {
                for (a, b) in row.iter().zip(expect.data()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
