//! Independent scalar-loop reference implementations. Nothing here calls
//! the tensor or autodiff code under test.

#![allow(dead_code)]

/// `x[b, n, u + t*O]` for every phase `u`, as `[u][b][n][t]`.
pub fn mote_index_map(x: &[f64], b: usize, n: usize, l: usize, o: usize) -> Vec<Vec<f64>> {
    let t_len = l / o;
    (0..o)
        .map(|u| {
            let mut sub = Vec::with_capacity(b * n * t_len);
            for bi in 0..b {
                for ni in 0..n {
                    for t in 0..t_len {
                        sub.push(x[(bi * n + ni) * l + u + t * o]);
                    }
                }
            }
            sub
        })
        .collect()
}

/// Gaussian basis value `exp(-((x - c) / h)^2 / 2)` written out directly.
pub fn gaussian(x: f64, c: f64, h: f64) -> f64 {
    let z = (x - c) / h;
    (-0.5 * z * z).exp()
}

/// RBF features of each row of `x: [rows, d]`, index `i * K + k`.
pub fn rbf_features(x: &[f64], d: usize, centers: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() * centers.len());
    for row in x.chunks(d) {
        for &xi in row {
            for &c in centers {
                out.push(gaussian(xi, c, h));
            }
        }
    }
    out
}

/// `y_j = sum_i sum_k w[i*K + k, j] * phi_k(x_i)` for each row.
pub fn kan_forward(x: &[f64], d_in: usize, d_out: usize, centers: &[f64], h: f64, w: &[f64]) -> Vec<f64> {
    let k_len = centers.len();
    let mut out = Vec::new();
    for row in x.chunks(d_in) {
        for j in 0..d_out {
            let mut acc = 0.0;
            for (i, &xi) in row.iter().enumerate() {
                for (k, &c) in centers.iter().enumerate() {
                    acc += w[(i * k_len + k) * d_out + j] * gaussian(xi, c, h);
                }
            }
            out.push(acc);
        }
    }
    out
}

/// LayerNorm over each row with population variance.
pub fn layer_norm(x: &[f64], d: usize, gamma: &[f64], beta: &[f64], eps: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(d) {
        let m = row.iter().sum::<f64>() / d as f64;
        let v = row.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / d as f64;
        for (i, a) in row.iter().enumerate() {
            out.push((a - m) / (v + eps).sqrt() * gamma[i] + beta[i]);
        }
    }
    out
}

/// Multi-head attention, one head and one query at a time.
/// Returns `(output [B, Sq, D], weights [B, H, Sq, Skv])`.
#[allow(clippy::too_many_arguments)]
pub fn attention(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    b: usize,
    sq: usize,
    skv: usize,
    d: usize,
    heads: usize,
    wq: &[f64],
    wk: &[f64],
    wv: &[f64],
    wo: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let dh = d / heads;
    let project = |x: &[f64], rows: usize, w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; rows * d];
        for r in 0..rows {
            for j in 0..d {
                let mut acc = 0.0;
                for i in 0..d {
                    acc += x[r * d + i] * w[i * d + j];
                }
                out[r * d + j] = acc;
            }
        }
        out
    };
    let mut output = vec![0.0; b * sq * d];
    let mut weights = vec![0.0; b * heads * sq * skv];
    for bi in 0..b {
        let qp = project(&q[bi * sq * d..(bi + 1) * sq * d], sq, wq);
        let kp = project(&k[bi * skv * d..(bi + 1) * skv * d], skv, wk);
        let vp = project(&v[bi * skv * d..(bi + 1) * skv * d], skv, wv);
        let mut concat = vec![0.0; sq * d];
        for hi in 0..heads {
            for i in 0..sq {
                let mut scores = vec![0.0; skv];
                for (j, s) in scores.iter_mut().enumerate() {
                    let mut dot = 0.0;
                    for c in 0..dh {
                        dot += qp[i * d + hi * dh + c] * kp[j * d + hi * dh + c];
                    }
                    *s = dot / (dh as f64).sqrt();
                }
                let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
                let z: f64 = exps.iter().sum();
                for j in 0..skv {
                    let a = exps[j] / z;
                    weights[((bi * heads + hi) * sq + i) * skv + j] = a;
                    for c in 0..dh {
                        concat[i * d + hi * dh + c] += a * vp[j * d + hi * dh + c];
                    }
                }
            }
        }
        let out = project(&concat, sq, wo);
        output[bi * sq * d..(bi + 1) * sq * d].copy_from_slice(&out);
    }
    (output, weights)
}

pub struct MetricOracle {
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    pub rse: f64,
    pub mape: f64,
}

/// The five error measures, each in its own loop.
pub fn metrics(pred: &[f64], target: &[f64]) -> MetricOracle {
    let n = pred.len() as f64;
    let mut mse = 0.0;
    for i in 0..pred.len() {
        mse += (target[i] - pred[i]).powi(2);
    }
    mse /= n;
    let mut mae = 0.0;
    for i in 0..pred.len() {
        mae += (target[i] - pred[i]).abs();
    }
    mae /= n;
    let mut mean = 0.0;
    for y in target {
        mean += y;
    }
    mean /= n;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..pred.len() {
        num += (target[i] - pred[i]).powi(2);
        den += (target[i] - mean).powi(2);
    }
    let mut mape = 0.0;
    let mut count = 0.0;
    for i in 0..pred.len() {
        if target[i].abs() >= 1e-8 {
            mape += ((target[i] - pred[i]) / target[i]).abs();
            count += 1.0;
        }
    }
    MetricOracle {
        mse,
        mae,
        rmse: mse.sqrt(),
        rse: num.sqrt() / den.sqrt(),
        mape: mape / count,
    }
}

/// Scalar Adam on `f(theta) = theta^2`; returns the trajectory.
pub fn adam_scalar(theta0: f64, lr: f64, steps: usize) -> Vec<f64> {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut m, mut v, mut th) = (0.0, 0.0, theta0);
    let mut out = Vec::with_capacity(steps);
    for t in 1..=steps {
        let g = 2.0 * th;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powi(t as i32));
        let vh = v / (1.0 - b2.powi(t as i32));
        th -= lr * mh / (vh.sqrt() + eps);
        out.push(th);
    }
    out
}

/// Largest elementwise absolute difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
