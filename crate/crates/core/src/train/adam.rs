use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::ParamStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.003,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    /// Lower rate used for the small datasets.
    pub fn small_dataset() -> Self {
        AdamConfig {
            lr: 0.002,
            ..Self::default()
        }
    }
}

/// Adam moments for every parameter of one store, in store order.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        AdamState {
            config,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn first_moment(&self, index: usize) -> &Tensor {
        &self.m[index]
    }

    pub fn second_moment(&self, index: usize) -> &Tensor {
        &self.v[index]
    }

    /// One bias-corrected update from the gradients in `store`, which are
    /// zeroed afterwards. Frozen parameters are skipped.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if store.len() != self.m.len() {
            return Err(Error::invalid(
                "adam",
                format!("state built for {} parameters, store has {}", self.m.len(), store.len()),
            ));
        }
        for p in store.iter_mut() {
            if !p.grad.is_finite() {
                return Err(Error::NonFinite { op: "adam gradient" });
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if !p.trainable {
                continue;
            }
            let g = p.grad.data();
            let (m, v) = (m.data_mut(), v.data_mut());
            let theta = p.value.data_mut();
            for i in 0..g.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        store.zero_grads();
        Ok(())
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = store
        .iter()
        .filter(|(_, p)| p.trainable)
        .flat_map(|(_, p)| p.grad.data().iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for p in store.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}
