//! Gaussian radial-basis KAN layer.
//!
//! Every input coordinate `x_d` is expanded against a fixed grid of centers
//! `c_k` as `exp(-(x_d - c_k)^2 / (2 h^2))`; a learnable `[in_dim * K, out_dim]`
//! matrix then mixes the expansions, so output `j` is
//! `sum_d sum_k w[(d, k), j] * phi(|x_d - c_k|)`. Each edge function
//! `phi_dj` of the KAN is therefore a weighted sum of shared Gaussian bumps.

use rand_chacha::ChaCha8Rng;

use super::{init_uniform, Ctx, LayerNorm};
use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Fixed RBF centers and bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfGrid {
    centers: Vec<f64>,
    bandwidth: f64,
}

impl RbfGrid {
    pub fn new(centers: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Config("RBF grid needs at least one center".into()));
        }
        if centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("RBF centers must be strictly increasing".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!("RBF bandwidth must be positive, got {bandwidth}")));
        }
        Ok(RbfGrid { centers, bandwidth })
    }

    /// `k` evenly spaced centers on `[lo, hi]`, bandwidth equal to the spacing.
    pub fn uniform(lo: f64, hi: f64, k: usize) -> Result<Self> {
        if k < 2 || hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Config(format!(
                "uniform RBF grid needs K >= 2 and hi > lo (K={k}, range [{lo}, {hi}])"
            )));
        }
        let step = (hi - lo) / (k - 1) as f64;
        let centers = (0..k).map(|i| lo + step * i as f64).collect();
        Self::new(centers, step)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Differentiable RBF expansion `[.., D] -> [.., D * K]`, feature index
/// `d * K + k`.
pub fn rbf_features(ctx: &mut Ctx, x: Var, grid: &RbfGrid) -> Result<Var> {
    let shape = ctx.graph.shape(x).to_vec();
    let d = *shape
        .last()
        .ok_or_else(|| Error::invalid("rbf_features", "rank-0 input"))?;
    let k = grid.len();
    let mut expanded = shape.clone();
    expanded.push(1);
    let g = &mut ctx.graph;
    let x1 = g.reshape(x, &expanded)?;
    let c = g.constant(Tensor::from_vec(grid.centers.clone()))?;
    let diff = g.sub(x1, c)?;
    let sq = g.square(diff)?;
    let h = grid.bandwidth;
    let scaled = g.scale(sq, -1.0 / (2.0 * h * h))?;
    let phi = g.exp(scaled)?;
    let mut out_shape = shape;
    *out_shape.last_mut().unwrap() = d * k;
    g.reshape(phi, &out_shape)
}

#[derive(Debug, Clone)]
pub struct RbfKanLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub grid: RbfGrid,
    /// `[in_dim * K, out_dim]`.
    pub weights: ParamId,
    pub pre_norm: Option<LayerNorm>,
}

impl RbfKanLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        grid: RbfGrid,
        pre_norm: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let fan_in = in_dim * grid.len();
        let pre_norm = if pre_norm {
            Some(LayerNorm::new(store, &format!("{name}.norm"), in_dim)?)
        } else {
            None
        };
        let weights = store.add(
            format!("{name}.weights"),
            init_uniform(&[fan_in, out_dim], fan_in, rng),
        )?;
        Ok(RbfKanLayer {
            in_dim,
            out_dim,
            grid,
            weights,
            pre_norm,
        })
    }

    /// `[.., in_dim] -> [.., out_dim]`.
    pub fn forward(&self, ctx: &mut Ctx, x: Var) -> Result<Var> {
        let shape = ctx.graph.shape(x);
        if shape.last() != Some(&self.in_dim) {
            return Err(Error::shape("kan_forward", shape, &[self.in_dim, self.out_dim]));
        }
        let x = match &self.pre_norm {
            Some(norm) => norm.forward(ctx, x)?,
            None => x,
        };
        let phi = rbf_features(ctx, x, &self.grid)?;
        let w = ctx.param(self.weights);
        ctx.graph.matmul(phi, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn grid_validation() {
        assert!(RbfGrid::uniform(-2.0, 2.0, 1).is_err());
        assert!(RbfGrid::new(vec![0.0, 0.0], 1.0).is_err());
        assert!(RbfGrid::new(vec![0.0, 1.0], 0.0).is_err());
        let g = RbfGrid::uniform(-2.0, 2.0, 8).unwrap();
        assert_eq!(g.len(), 8);
        assert!((g.bandwidth() - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(g.centers()[0], -2.0);
        assert!((g.centers()[7] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn feature_at_center_and_one_bandwidth_away() {
        let grid = RbfGrid::new(vec![-1.0, 0.5], 0.3).unwrap();
        let store = ParamStore::new();
        let mut ctx = Ctx::eval(&store);
        let x = ctx.input(Tensor::from_vec(vec![0.5, -1.0 + 0.3])).unwrap();
        let f = rbf_features(&mut ctx, x, &grid).unwrap();
        let v = ctx.graph.value(f);
        assert_eq!(v.shape(), &[4]);
        assert_eq!(v.data()[1], 1.0);
        assert!((v.data()[2] - 0.606_530_659_7).abs() < 1e-10);
    }

    #[test]
    fn single_center_unit_weights() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let grid = RbfGrid::new(vec![0.0], 1.0).unwrap();
        let layer = RbfKanLayer::new(&mut store, "kan", 1, 1, grid, false, &mut rng).unwrap();
        store.set_value(layer.weights, Tensor::ones(&[1, 1])).unwrap();
        let mut ctx = Ctx::eval(&store);
        let x = ctx.input(Tensor::zeros(&[1, 1])).unwrap();
        let y = layer.forward(&mut ctx, x).unwrap();
        assert_eq!(ctx.graph.value(y).data(), &[1.0]);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid = RbfGrid::uniform(-2.0, 2.0, 8).unwrap();
        let layer = RbfKanLayer::new(&mut store, "kan", 5, 3, grid, true, &mut rng).unwrap();
        store.set_value(layer.weights, Tensor::zeros(&[40, 3])).unwrap();
        let mut ctx = Ctx::eval(&store);
        let x = ctx.input(Tensor::uniform(&[2, 4, 5], 3.0, &mut rng)).unwrap();
        let y = layer.forward(&mut ctx, x).unwrap();
        assert_eq!(ctx.graph.value(y).shape(), &[2, 4, 3]);
        assert!(ctx.graph.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid = RbfGrid::uniform(-2.0, 2.0, 4).unwrap();
        let layer = RbfKanLayer::new(&mut store, "kan", 5, 3, grid, true, &mut rng).unwrap();
        let mut ctx = Ctx::eval(&store);
        let x = ctx.input(Tensor::zeros(&[2, 4])).unwrap();
        assert!(layer.forward(&mut ctx, x).is_err());
    }
}
