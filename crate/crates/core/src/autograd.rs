//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] is built fresh for every forward pass. Each op appends a node
//! holding its value and enough information to run its backward rule; since
//! nodes are only ever appended, index order is a topological order and the
//! backward sweep is a single reverse scan.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::tensor::{
    self, axis_extents, broadcast_offsets, broadcast_shape, check_axis, gemm_nt_acc, gemm_tn_acc,
    inverse_permutation, matmul_plan, Tensor,
};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Elementwise function plus its derivative, for ops defined outside this
/// module.
#[derive(Clone, Copy)]
pub struct UnaryFn {
    pub name: &'static str,
    pub forward: fn(f64) -> f64,
    pub derivative: fn(f64) -> f64,
}

#[derive(Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Exp(Var),
    Square(Var),
    Sqrt(Var),
    Gelu(Var),
    Custom(Var, UnaryFn),
    Matmul(Var, Var),
    Softmax(Var, usize),
    Sum(Var),
    Mean(Var),
    SumAxis(Var),
    MeanAxis(Var, usize),
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Concat(Vec<Var>, usize),
    SliceStrided {
        x: Var,
        axis: usize,
        start: usize,
        step: usize,
    },
    Conv1dSame(Var, Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_vars: HashMap<ParamId, Var>,
}

/// Gradients from one backward sweep, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(ParamId, usize)>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Adds each parameter gradient into `store`. Parameters not reachable
    /// from the loss are left untouched.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for &(id, node) in &self.params {
            if let Some(g) = &self.grads[node] {
                store.get_mut(id).grad.add_assign(g);
            }
        }
    }
}

fn ensure_finite(op: &'static str, t: &Tensor) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

fn gelu_tanh(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_tanh_grad(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    let inner = C * (x + 0.044715 * x * x * x);
    let t = inner.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Sums `grad` (shaped `out_shape`) down to `in_shape` across broadcast axes.
fn reduce_broadcast(grad: &Tensor, in_shape: &[usize]) -> Tensor {
    if grad.shape() == in_shape {
        return grad.clone();
    }
    let offsets = broadcast_offsets(in_shape, grad.shape());
    let mut acc = Tensor::zeros(in_shape);
    let a = acc.data_mut();
    for (g, &o) in grad.data().iter().zip(&offsets) {
        a[o] += g;
    }
    acc
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var> {
        ensure_finite(op_name, &value)?;
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Non-trainable input or constant.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push("constant", value, Op::Leaf)
    }

    /// Leaf bound to a parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            value: store.value(id).clone(),
            op: Op::Leaf,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let out_shape =
            broadcast_shape(ta.shape(), tb.shape()).ok_or_else(|| Error::shape(name, ta.shape(), tb.shape()))?;
        let data: Vec<f64> = if ta.shape() == tb.shape() {
            ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let oa = broadcast_offsets(ta.shape(), &out_shape);
            let ob = broadcast_offsets(tb.shape(), &out_shape);
            oa.iter()
                .zip(&ob)
                .map(|(&i, &j)| f(ta.data()[i], tb.data()[j]))
                .collect()
        };
        let value = Tensor::new(&out_shape, data)?;
        self.push(name, value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let v = self.value(x).map(|v| v * c);
        self.push("scale", v, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        let v = self.value(x).map(|v| v + c);
        self.push("add_scalar", v, Op::AddScalar(x))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(f64::exp);
        self.push("exp", v, Op::Exp(x))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(|v| v * v);
        self.push("square", v, Op::Square(x))
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        if self.value(x).data().iter().any(|&v| v <= 0.0) {
            return Err(Error::NonFinite { op: "sqrt" });
        }
        let v = self.value(x).map(f64::sqrt);
        self.push("sqrt", v, Op::Sqrt(x))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(gelu_tanh);
        self.push("gelu", v, Op::Gelu(x))
    }

    pub fn custom_unary(&mut self, x: Var, f: UnaryFn) -> Result<Var> {
        let v = self.value(x).map(f.forward);
        self.push(f.name, v, Op::Custom(x, f))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        self.push("matmul", v, Op::Matmul(a, b))
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let t = self.value(x);
        check_axis("softmax", t.shape(), axis)?;
        let (outer, len, inner) = axis_extents(t.shape(), axis);
        let src = t.data();
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let max = (0..len)
                    .map(|j| src[base + j * inner])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..len {
                    let e = (src[base + j * inner] - max).exp();
                    out[base + j * inner] = e;
                    total += e;
                }
                for j in 0..len {
                    out[base + j * inner] /= total;
                }
            }
        }
        let v = Tensor::new(t.shape(), out)?;
        self.push("softmax", v, Op::Softmax(x, axis))
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let v = Tensor::scalar(self.value(x).sum());
        self.push("sum", v, Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = Tensor::scalar(self.value(x).mean());
        self.push("mean", v, Op::Mean(x))
    }

    fn reduce_axis(&self, op: &'static str, x: Var, axis: usize) -> Result<Tensor> {
        let t = self.value(x);
        check_axis(op, t.shape(), axis)?;
        let (outer, len, inner) = axis_extents(t.shape(), axis);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for j in 0..len {
                let row = &t.data()[(o * len + j) * inner..(o * len + j + 1) * inner];
                for (acc, v) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *acc += v;
                }
            }
        }
        let mut shape = t.shape().to_vec();
        shape[axis] = 1;
        Tensor::new(&shape, out)
    }

    /// Sum along `axis`, keeping it with extent 1.
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let v = self.reduce_axis("sum_axis", x, axis)?;
        self.push("sum_axis", v, Op::SumAxis(x))
    }

    /// Mean along `axis`, keeping it with extent 1.
    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let n = self.shape(x).get(axis).copied().unwrap_or(1) as f64;
        let v = self.reduce_axis("mean_axis", x, axis)?.map(|s| s / n);
        self.push("mean_axis", v, Op::MeanAxis(x, axis))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x).reshape(shape)?;
        self.push("reshape", v, Op::Reshape(x))
    }

    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let v = tensor::permute(self.value(x), axes)?;
        self.push("permute", v, Op::Permute(x, axes.to_vec()))
    }

    pub fn transpose(&mut self, x: Var, a: usize, b: usize) -> Result<Var> {
        let rank = self.shape(x).len();
        if a >= rank || b >= rank {
            return Err(Error::OutOfRange {
                op: "transpose",
                detail: format!("axes ({a}, {b}) for rank {rank}"),
            });
        }
        let mut axes: Vec<usize> = (0..rank).collect();
        axes.swap(a, b);
        self.permute(x, &axes)
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat", "no inputs"))?;
        let base = self.shape(*first).to_vec();
        check_axis("concat", &base, axis)?;
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::shape("concat", &base, s));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = axis_extents(&shape, axis);
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for &p in parts {
                let t = self.value(p);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let v = Tensor::new(&shape, data)?;
        self.push("concat", v, Op::Concat(parts.to_vec(), axis))
    }

    /// Elements `start, start + step, ...` along `axis`, up to its end.
    pub fn slice_strided(&mut self, x: Var, axis: usize, start: usize, step: usize) -> Result<Var> {
        let v = slice_strided(self.value(x), axis, start, step)?;
        self.push(
            "slice_strided",
            v,
            Op::SliceStrided {
                x,
                axis,
                start,
                step,
            },
        )
    }

    /// Single-channel convolution along the last axis with zero padding that
    /// keeps the length unchanged. `kernel` is rank 1 of odd length.
    pub fn conv1d_same(&mut self, x: Var, kernel: Var) -> Result<Var> {
        let (tx, tk) = (self.value(x), self.value(kernel));
        if tk.rank() != 1 || tk.len() % 2 == 0 || tx.rank() == 0 {
            return Err(Error::shape("conv1d_same", tx.shape(), tk.shape()));
        }
        let len = *tx.shape().last().unwrap();
        let k = tk.len();
        let pad = (k - 1) / 2;
        let w = tk.data();
        let mut out = vec![0.0; tx.len()];
        for (row_in, row_out) in tx.data().chunks(len).zip(out.chunks_mut(len)) {
            for (i, o) in row_out.iter_mut().enumerate() {
                let mut s = 0.0;
                for (j, wj) in w.iter().enumerate() {
                    let src = i + j;
                    if src >= pad && src - pad < len {
                        s += wj * row_in[src - pad];
                    }
                }
                *o = s;
            }
        }
        let v = Tensor::new(tx.shape(), out)?;
        self.push("conv1d_same", v, Op::Conv1dSame(x, kernel))
    }

    /// Reverse sweep from a scalar `loss`. Each node is visited at most once,
    /// in reverse creation order.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::invalid(
                "backward",
                format!("loss must be scalar, got shape {:?}", lv.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::ones(lv.shape()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.backprop_node(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        let params = self
            .param_vars
            .iter()
            .filter(|(_, v)| v.0 <= loss.0)
            .map(|(&id, v)| (id, v.0))
            .collect();
        grads.resize(self.nodes.len(), None);
        Ok(Gradients { grads, params })
    }

    fn backprop_node(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut send = |v: Var, contrib: Tensor| match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&contrib),
            slot @ None => *slot = Some(contrib),
        };
        let val = |v: Var| &self.nodes[v.0].value;

        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                send(*a, reduce_broadcast(g, val(*a).shape()));
                send(*b, reduce_broadcast(g, val(*b).shape()));
            }
            Op::Sub(a, b) => {
                send(*a, reduce_broadcast(g, val(*a).shape()));
                send(*b, reduce_broadcast(&g.map(|v| -v), val(*b).shape()));
            }
            Op::Mul(a, b) | Op::Div(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let out_shape = g.shape();
                let oa = broadcast_offsets(ta.shape(), out_shape);
                let ob = broadcast_offsets(tb.shape(), out_shape);
                let mut ga = Tensor::zeros(ta.shape());
                let mut gb = Tensor::zeros(tb.shape());
                let is_div = matches!(node.op, Op::Div(..));
                {
                    let (da, db) = (ga.data_mut(), gb.data_mut());
                    for ((gv, &i), &j) in g.data().iter().zip(&oa).zip(&ob) {
                        let (x, y) = (ta.data()[i], tb.data()[j]);
                        if is_div {
                            da[i] += gv / y;
                            db[j] -= gv * x / (y * y);
                        } else {
                            da[i] += gv * y;
                            db[j] += gv * x;
                        }
                    }
                }
                send(*a, ga);
                send(*b, gb);
            }
            Op::Scale(x, c) => send(*x, g.map(|v| v * c)),
            Op::AddScalar(x) => send(*x, g.clone()),
            Op::Exp(x) => send(*x, zip_map(g, &node.value, |gv, y| gv * y)),
            Op::Square(x) => send(*x, zip_map(g, val(*x), |gv, xv| 2.0 * gv * xv)),
            Op::Sqrt(x) => send(*x, zip_map(g, &node.value, |gv, y| gv / (2.0 * y))),
            Op::Gelu(x) => send(*x, zip_map(g, val(*x), |gv, xv| gv * gelu_tanh_grad(xv))),
            Op::Custom(x, f) => {
                let d = f.derivative;
                send(*x, zip_map(g, val(*x), |gv, xv| gv * d(xv)))
            }
            Op::Matmul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let plan = matmul_plan(ta.shape(), tb.shape())?;
                let (m, k, n) = (plan.m, plan.k, plan.n);
                let mut ga = Tensor::zeros(ta.shape());
                let mut gb = Tensor::zeros(tb.shape());
                for (bi, (&ab, &bb)) in plan.a_batches.iter().zip(&plan.b_batches).enumerate() {
                    let gslice = &g.data()[bi * m * n..(bi + 1) * m * n];
                    gemm_nt_acc(
                        gslice,
                        &tb.data()[bb * k * n..(bb + 1) * k * n],
                        &mut ga.data_mut()[ab * m * k..(ab + 1) * m * k],
                        m,
                        n,
                        k,
                    );
                    gemm_tn_acc(
                        &ta.data()[ab * m * k..(ab + 1) * m * k],
                        gslice,
                        &mut gb.data_mut()[bb * k * n..(bb + 1) * k * n],
                        m,
                        k,
                        n,
                    );
                }
                send(*a, ga);
                send(*b, gb);
            }
            Op::Softmax(x, axis) => {
                let y = &node.value;
                let (outer, len, inner) = axis_extents(y.shape(), *axis);
                let mut gx = vec![0.0; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let base = o * len * inner + i;
                        let dot: f64 = (0..len)
                            .map(|j| g.data()[base + j * inner] * y.data()[base + j * inner])
                            .sum();
                        for j in 0..len {
                            let p = base + j * inner;
                            gx[p] = y.data()[p] * (g.data()[p] - dot);
                        }
                    }
                }
                send(*x, Tensor::new(y.shape(), gx)?);
            }
            Op::Sum(x) => send(*x, Tensor::full(val(*x).shape(), g.data()[0])),
            Op::Mean(x) => {
                let n = val(*x).len() as f64;
                send(*x, Tensor::full(val(*x).shape(), g.data()[0] / n));
            }
            Op::SumAxis(x) => send(*x, broadcast_to(g, val(*x).shape(), 1.0)),
            Op::MeanAxis(x, axis) => {
                let n = val(*x).shape()[*axis] as f64;
                send(*x, broadcast_to(g, val(*x).shape(), 1.0 / n));
            }
            Op::Reshape(x) => send(*x, g.reshape(val(*x).shape())?),
            Op::Permute(x, axes) => send(*x, tensor::permute(g, &inverse_permutation(axes))?),
            Op::Concat(parts, axis) => {
                let (outer, total, inner) = axis_extents(g.shape(), *axis);
                let mut offset = 0;
                for &p in parts {
                    let shape = val(p).shape();
                    let width = shape[*axis];
                    let mut data = Vec::with_capacity(val(p).len());
                    for o in 0..outer {
                        let start = (o * total + offset) * inner;
                        data.extend_from_slice(&g.data()[start..start + width * inner]);
                    }
                    offset += width;
                    send(p, Tensor::new(shape, data)?);
                }
            }
            Op::SliceStrided {
                x,
                axis,
                start,
                step,
            } => {
                let shape = val(*x).shape();
                let (outer, len, inner) = axis_extents(shape, *axis);
                let count = g.shape()[*axis];
                let mut gx = vec![0.0; val(*x).len()];
                for o in 0..outer {
                    for t in 0..count {
                        let src = (o * count + t) * inner;
                        let dst = (o * len + start + t * step) * inner;
                        gx[dst..dst + inner].copy_from_slice(&g.data()[src..src + inner]);
                    }
                }
                send(*x, Tensor::new(shape, gx)?);
            }
            Op::Conv1dSame(x, kernel) => {
                let (tx, tk) = (val(*x), val(*kernel));
                let len = *tx.shape().last().unwrap();
                let k = tk.len();
                let pad = (k - 1) / 2;
                let mut gx = vec![0.0; tx.len()];
                let mut gk = vec![0.0; k];
                for ((row_in, row_g), row_gx) in tx
                    .data()
                    .chunks(len)
                    .zip(g.data().chunks(len))
                    .zip(gx.chunks_mut(len))
                {
                    for (i, &gi) in row_g.iter().enumerate() {
                        for (j, (gkj, &kj)) in gk.iter_mut().zip(tk.data()).enumerate() {
                            let src = i + j;
                            if src >= pad && src - pad < len {
                                *gkj += gi * row_in[src - pad];
                                row_gx[src - pad] += gi * kj;
                            }
                        }
                    }
                }
                send(*x, Tensor::new(tx.shape(), gx)?);
                send(*kernel, Tensor::new(tk.shape(), gk)?);
            }
        }
        Ok(())
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape(), data).expect("same shape")
}

/// Expands a reduced tensor back over the axes it was reduced along.
fn broadcast_to(g: &Tensor, shape: &[usize], factor: f64) -> Tensor {
    let offsets = broadcast_offsets(g.shape(), shape);
    let data = offsets.iter().map(|&o| g.data()[o] * factor).collect();
    Tensor::new(shape, data).expect("broadcast shape")
}

/// Plain-tensor strided slice: `start, start + step, ...` along `axis`.
pub fn slice_strided(t: &Tensor, axis: usize, start: usize, step: usize) -> Result<Tensor> {
    check_axis("slice_strided", t.shape(), axis)?;
    if step == 0 {
        return Err(Error::OutOfRange {
            op: "slice_strided",
            detail: "step must be positive".into(),
        });
    }
    let (outer, len, inner) = axis_extents(t.shape(), axis);
    if start >= len {
        return Err(Error::OutOfRange {
            op: "slice_strided",
            detail: format!("start {start} for axis of length {len}"),
        });
    }
    let count = (len - start).div_ceil(step);
    let mut data = Vec::with_capacity(outer * count * inner);
    for o in 0..outer {
        for c in 0..count {
            let src = (o * len + start + c * step) * inner;
            data.extend_from_slice(&t.data()[src..src + inner]);
        }
    }
    let mut shape = t.shape().to_vec();
    shape[axis] = count;
    Tensor::new(&shape, data)
}
