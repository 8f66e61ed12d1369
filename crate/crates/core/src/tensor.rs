//! Dense row-major `f64` tensors and the raw kernels shared by the forward
//! and backward passes of the autodiff tape.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense N-dimensional array of `f64` in row-major order.
///
/// The invariant `shape.iter().product() == data.len()` holds for every
/// value constructed through the public API. A rank-0 tensor (empty shape)
/// holds exactly one element.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.data.len() <= 16 {
            write!(f, "Tensor{:?} {:?}", self.shape, self.data)
        } else {
            write!(
                f,
                "Tensor{:?} [{}, {}, ... {} elements]",
                self.shape,
                self.data[0],
                self.data[1],
                self.data.len()
            )
        }
    }
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid("tensor", format!("zero-sized dimension in {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::invalid(
                "tensor",
                format!("shape {shape:?} needs {expected} elements, got {}", data.len()),
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Uniform draws in `[-bound, bound)`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let off = self.offset(index)?;
        self.data[off] = value;
        Ok(())
    }

    fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() || index.iter().zip(&self.shape).any(|(i, d)| i >= d) {
            return Err(Error::OutOfRange {
                op: "index",
                detail: format!("{index:?} for shape {:?}", self.shape),
            });
        }
        Ok(index
            .iter()
            .zip(strides(&self.shape))
            .map(|(i, s)| i * s)
            .sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.contains(&0) {
            return Err(Error::invalid(
                "reshape",
                format!("cannot view {:?} as {shape:?}", self.shape),
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::shape("max_abs_diff", &self.shape, &other.shape));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        matmul(self, other)
    }

    pub fn permute(&self, axes: &[usize]) -> Result<Tensor> {
        permute(self, axes)
    }

    /// Swaps two axes.
    pub fn transpose(&self, a: usize, b: usize) -> Result<Tensor> {
        let mut axes: Vec<usize> = (0..self.rank()).collect();
        if a >= axes.len() || b >= axes.len() {
            return Err(Error::OutOfRange {
                op: "transpose",
                detail: format!("axes ({a}, {b}) for rank {}", self.rank()),
            });
        }
        axes.swap(a, b);
        permute(self, &axes)
    }
}

/// Row-major strides.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Numpy-style broadcast of two shapes.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// For every element of `out_shape` (row-major), the flat offset of the
/// element of a tensor of shape `in_shape` that broadcasts onto it.
pub fn broadcast_offsets(in_shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let n: usize = out_shape.iter().product();
    if in_shape == out_shape {
        return (0..n).collect();
    }
    let rank = out_shape.len();
    let pad = rank - in_shape.len();
    let in_strides = strides(in_shape);
    // Effective stride per output axis; zero where broadcast.
    let eff: Vec<usize> = (0..rank)
        .map(|i| {
            if i < pad || in_shape[i - pad] == 1 {
                0
            } else {
                in_strides[i - pad]
            }
        })
        .collect();
    let mut offsets = Vec::with_capacity(n);
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for _ in 0..n {
        offsets.push(off);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            off += eff[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off -= eff[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    offsets
}

/// Splits `shape` around `axis` into (outer, axis length, inner) extents.
pub(crate) fn axis_extents(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub(crate) fn check_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(Error::OutOfRange {
            op,
            detail: format!("axis {axis} for shape {shape:?}"),
        });
    }
    Ok(())
}

/// `c[m,n] += a[m,k] * b[k,n]` on raw slices.
pub(crate) fn gemm_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[m,n] += a[m,k] * b[n,k]^T`.
pub(crate) fn gemm_nt_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            c[i * n + j] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `c[k,n] += a[m,k]^T * b[m,n]`.
pub(crate) fn gemm_tn_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// Geometry of a batched matmul: broadcast batch shape plus per-batch
/// offsets into each operand.
pub(crate) struct MatmulPlan {
    pub out_shape: Vec<usize>,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub a_batches: Vec<usize>,
    pub b_batches: Vec<usize>,
}

pub(crate) fn matmul_plan(a: &[usize], b: &[usize]) -> Result<MatmulPlan> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::shape("matmul", a, b));
    }
    let (m, k) = (a[a.len() - 2], a[a.len() - 1]);
    let (k2, n) = (b[b.len() - 2], b[b.len() - 1]);
    if k != k2 {
        return Err(Error::shape("matmul", a, b));
    }
    let a_batch = &a[..a.len() - 2];
    let b_batch = &b[..b.len() - 2];
    let batch = broadcast_shape(a_batch, b_batch).ok_or_else(|| Error::shape("matmul", a, b))?;
    let a_batches = broadcast_offsets(a_batch, &batch);
    let b_batches = broadcast_offsets(b_batch, &batch);
    let mut out_shape = batch;
    out_shape.extend([m, n]);
    Ok(MatmulPlan {
        out_shape,
        m,
        k,
        n,
        a_batches,
        b_batches,
    })
}

/// Batched matrix product `[..,m,k] x [..,k,n] -> [..,m,n]` with
/// broadcastable batch dimensions.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let plan = matmul_plan(&a.shape, &b.shape)?;
    let (m, k, n) = (plan.m, plan.k, plan.n);
    let mut out = vec![0.0; plan.a_batches.len() * m * n];
    for (bi, (&ab, &bb)) in plan.a_batches.iter().zip(&plan.b_batches).enumerate() {
        gemm_acc(
            &a.data[ab * m * k..(ab + 1) * m * k],
            &b.data[bb * k * n..(bb + 1) * k * n],
            &mut out[bi * m * n..(bi + 1) * m * n],
            m,
            k,
            n,
        );
    }
    Tensor::new(&plan.out_shape, out)
}

pub fn permute(t: &Tensor, axes: &[usize]) -> Result<Tensor> {
    let rank = t.rank();
    let mut seen = vec![false; rank];
    if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
        return Err(Error::invalid(
            "permute",
            format!("{axes:?} is not a permutation of rank {rank}"),
        ));
    }
    let out_shape: Vec<usize> = axes.iter().map(|&a| t.shape[a]).collect();
    let in_strides = strides(&t.shape);
    let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let n = t.data.len();
    let mut data = Vec::with_capacity(n);
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for _ in 0..n {
        data.push(t.data[off]);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            off += src_strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off -= src_strides[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    Ok(Tensor {
        shape: out_shape,
        data,
    })
}

pub(crate) fn inverse_permutation(axes: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; axes.len()];
    for (i, &a) in axes.iter().enumerate() {
        inv[a] = i;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    s += a[i * k + p] * b[p * n + j];
                }
                c[i * n + j] = s;
            }
        }
        c
    }

    #[test]
    fn matmul_identity() {
        let a = Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.matmul(&Tensor::eye(2)).unwrap(), a);
        let b = Tensor::new(&[2, 1], vec![5.0, 7.0]).unwrap();
        assert_eq!(Tensor::eye(2).matmul(&b).unwrap(), b);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Tensor::uniform(&[3, 4], 1.0, &mut rng);
        let b = Tensor::uniform(&[4, 2], 1.0, &mut rng);
        let c = a.matmul(&b).unwrap();
        let oracle = naive_matmul(a.data(), b.data(), 3, 4, 2);
        for (x, y) in c.data().iter().zip(&oracle) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn matmul_broadcasts_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Tensor::uniform(&[2, 3, 3, 4], 1.0, &mut rng);
        let b = Tensor::uniform(&[4, 5], 1.0, &mut rng);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), &[2, 3, 3, 5]);
        for batch in 0..6 {
            let oracle = naive_matmul(&a.data()[batch * 12..(batch + 1) * 12], b.data(), 3, 4, 5);
            for (x, y) in c.data()[batch * 15..(batch + 1) * 15].iter().zip(&oracle) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = Tensor::zeros(&[2, 3]).matmul(&Tensor::zeros(&[2, 3])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Tensor::new(&[2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(&[0, 2], vec![]).is_err());
    }

    #[test]
    fn broadcast_offsets_for_bias() {
        assert_eq!(broadcast_offsets(&[3], &[2, 3]), vec![0, 1, 2, 0, 1, 2]);
        assert_eq!(broadcast_offsets(&[2, 1], &[2, 3]), vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(broadcast_shape(&[2, 1, 4], &[3, 1]), Some(vec![2, 3, 4]));
        assert_eq!(broadcast_shape(&[2], &[3]), None);
    }

    #[test]
    fn transpose_twice_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = Tensor::uniform(&[2, 3, 4], 1.0, &mut rng);
        let back = t.transpose(0, 2).unwrap().transpose(0, 2).unwrap();
        assert_eq!(back, t);
        let p = t.permute(&[1, 2, 0]).unwrap();
        assert_eq!(p.shape(), &[3, 4, 2]);
        assert_eq!(p.get(&[2, 1, 1]).unwrap(), t.get(&[1, 2, 1]).unwrap());
        assert_eq!(p.permute(&inverse_permutation(&[1, 2, 0])).unwrap(), t);
    }
}
