//! Multi-offset token embedding: interleaved phase splitting of a series.
//!
//! With offset count `O`, sub-sequence `u` holds `x[u], x[u + O], x[u + 2O], ...`,
//! i.e. the series downsampled by `O` at phase `u`. Reassembly writes
//! `subs[u][t]` back to position `u + t * O`, so the pair is lossless.

use serde::{Deserialize, Serialize};

use crate::autograd::{slice_strided, Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Short description of the split rule, embedded in reports.
pub const SPLIT_SEMANTICS: &str = "strided: sub-sequence u = x[u + t*O], t = 0..L/O";

/// How a lookback length that is not a multiple of `O` is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PadMode {
    /// Reject `L % O != 0`.
    #[default]
    Strict,
    /// Left-pad by replicating the earliest value up to the next multiple of `O`.
    ReplicateLeft,
}

/// Number of left-pad steps needed to make `len` a multiple of `offset`.
pub fn pad_amount(len: usize, offset: usize, mode: PadMode) -> Result<usize> {
    if offset == 0 || offset > len {
        return Err(Error::Config(format!(
            "offset count O={offset} must satisfy 1 <= O <= L (L={len})"
        )));
    }
    let rem = len % offset;
    match (rem, mode) {
        (0, _) => Ok(0),
        (_, PadMode::ReplicateLeft) => Ok(offset - rem),
        (_, PadMode::Strict) => Err(Error::Config(format!(
            "lookback L={len} is not divisible by offset count O={offset}"
        ))),
    }
}

/// The `O` phase sub-sequences of a `[B, N, L]` series.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetBundle {
    pub offset: usize,
    /// `O` tensors of shape `[B, N, T]`.
    pub subs: Vec<Tensor>,
    pub source_length: usize,
    /// Left-pad steps prepended before splitting.
    pub padding: usize,
}

impl OffsetBundle {
    pub fn sub_length(&self) -> usize {
        (self.source_length + self.padding) / self.offset
    }
}

fn check_series(op: &'static str, x: &Tensor) -> Result<()> {
    if x.rank() != 3 {
        return Err(Error::invalid(op, format!("expected [B, N, L], got {:?}", x.shape())));
    }
    Ok(())
}

fn left_pad_plain(x: &Tensor, pad: usize) -> Result<Tensor> {
    if pad == 0 {
        return Ok(x.clone());
    }
    let l = x.shape()[2];
    let mut data = Vec::with_capacity(x.len() / l * (l + pad));
    for row in x.data().chunks(l) {
        data.extend(std::iter::repeat_n(row[0], pad));
        data.extend_from_slice(row);
    }
    Tensor::new(&[x.shape()[0], x.shape()[1], l + pad], data)
}

/// Splits `x: [B, N, L]` into `O` interleaved sub-sequences.
pub fn split(x: &Tensor, offset: usize) -> Result<OffsetBundle> {
    split_with(x, offset, PadMode::Strict)
}

pub fn split_with(x: &Tensor, offset: usize, mode: PadMode) -> Result<OffsetBundle> {
    check_series("mote.split", x)?;
    let len = x.shape()[2];
    let padding = pad_amount(len, offset, mode)?;
    let padded = left_pad_plain(x, padding)?;
    let subs = (0..offset)
        .map(|u| slice_strided(&padded, 2, u, offset))
        .collect::<Result<Vec<_>>>()?;
    Ok(OffsetBundle {
        offset,
        subs,
        source_length: len,
        padding,
    })
}

/// Inverse of [`split`]: position `u + t * O` of the output is `subs[u][.., t]`.
/// Left padding, if any, is dropped.
pub fn reassemble(bundle: &OffsetBundle) -> Result<Tensor> {
    let o = bundle.offset;
    let first = bundle
        .subs
        .first()
        .ok_or_else(|| Error::invalid("mote.reassemble", "empty bundle"))?;
    if bundle.subs.len() != o {
        return Err(Error::invalid(
            "mote.reassemble",
            format!("bundle declares O={o} but holds {} sub-sequences", bundle.subs.len()),
        ));
    }
    check_series("mote.reassemble", first)?;
    for s in &bundle.subs {
        if s.shape() != first.shape() {
            return Err(Error::shape("mote.reassemble", first.shape(), s.shape()));
        }
    }
    let (b, n, t) = (first.shape()[0], first.shape()[1], first.shape()[2]);
    let full = t * o;
    if full != bundle.source_length + bundle.padding {
        return Err(Error::invalid(
            "mote.reassemble",
            format!(
                "O*T = {full} does not match source length {} + padding {}",
                bundle.source_length, bundle.padding
            ),
        ));
    }
    let mut data = vec![0.0; b * n * bundle.source_length];
    for row in 0..b * n {
        for (u, sub) in bundle.subs.iter().enumerate() {
            for step in 0..t {
                let pos = u + step * o;
                if pos >= bundle.padding {
                    data[row * bundle.source_length + pos - bundle.padding] = sub.data()[row * t + step];
                }
            }
        }
    }
    Tensor::new(&[b, n, bundle.source_length], data)
}

/// Differentiable left padding by replication of the first step.
pub fn left_pad(g: &mut Graph, x: Var, pad: usize) -> Result<Var> {
    if pad == 0 {
        return Ok(x);
    }
    let len = g.shape(x)[2];
    let first = g.slice_strided(x, 2, 0, len)?;
    let mut parts = vec![first; pad];
    parts.push(x);
    g.concat(&parts, 2)
}

/// Differentiable split into a stacked `[B, O, N, T]` tensor whose slice
/// `[:, u]` is sub-sequence `u`. `x` must already have `L % O == 0`.
pub fn split_stacked(g: &mut Graph, x: Var, offset: usize) -> Result<Var> {
    let shape = g.shape(x).to_vec();
    if shape.len() != 3 {
        return Err(Error::invalid("mote.split", format!("expected [B, N, L], got {shape:?}")));
    }
    let (b, n, l) = (shape[0], shape[1], shape[2]);
    pad_amount(l, offset, PadMode::Strict)?;
    let t = l / offset;
    let r = g.reshape(x, &[b, n, t, offset])?;
    g.permute(r, &[0, 3, 1, 2])
}

/// Inverse of [`split_stacked`]: `[B, O, N, T]` -> `[B, N, O*T]`.
pub fn reassemble_stacked(g: &mut Graph, stacked: Var) -> Result<Var> {
    let shape = g.shape(stacked).to_vec();
    if shape.len() != 4 {
        return Err(Error::invalid(
            "mote.reassemble",
            format!("expected [B, O, N, T], got {shape:?}"),
        ));
    }
    let (b, o, n, t) = (shape[0], shape[1], shape[2], shape[3]);
    let p = g.permute(stacked, &[0, 2, 3, 1])?;
    g.reshape(p, &[b, n, t * o])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(len: usize) -> Tensor {
        Tensor::new(&[1, 1, len], (0..len).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn stride_two_split() {
        let b = split(&ramp(8), 2).unwrap();
        assert_eq!(b.subs[0].data(), &[0.0, 2.0, 4.0, 6.0]);
        assert_eq!(b.subs[1].data(), &[1.0, 3.0, 5.0, 7.0]);
        assert_eq!(reassemble(&b).unwrap(), ramp(8));
    }

    #[test]
    fn single_offset_is_identity() {
        let x = ramp(5);
        let b = split(&x, 1).unwrap();
        assert_eq!(b.subs.len(), 1);
        assert_eq!(b.subs[0], x);
        assert_eq!(reassemble(&b).unwrap(), x);
    }

    #[test]
    fn indivisible_length_is_a_config_error() {
        let err = split(&ramp(10), 4).unwrap_err().to_string();
        assert!(err.contains("L=10") && err.contains("O=4"), "{err}");
        assert!(split(&ramp(4), 0).is_err());
        assert!(split(&ramp(4), 5).is_err());
    }

    #[test]
    fn replicate_left_padding() {
        let b = split_with(&ramp(6), 4, PadMode::ReplicateLeft).unwrap();
        assert_eq!(b.padding, 2);
        // padded: [0, 0, 0, 1, 2, 3, 4, 5]
        assert_eq!(b.subs[0].data(), &[0.0, 2.0]);
        assert_eq!(b.subs[1].data(), &[0.0, 3.0]);
        assert_eq!(b.subs[2].data(), &[0.0, 4.0]);
        assert_eq!(b.subs[3].data(), &[1.0, 5.0]);
        assert_eq!(reassemble(&b).unwrap(), ramp(6));
    }

    #[test]
    fn reassemble_rejects_ragged_bundle() {
        let mut b = split(&ramp(8), 2).unwrap();
        b.subs[1] = ramp(3);
        assert!(reassemble(&b).is_err());
        b.subs.pop();
        assert!(reassemble(&b).is_err());
    }

    #[test]
    fn stacked_route_matches_plain_route() {
        let x = Tensor::new(&[2, 3, 12], (0..72).map(|v| v as f64 * 0.5).collect()).unwrap();
        let bundle = split(&x, 3).unwrap();
        let mut g = Graph::new();
        let xv = g.constant(x.clone()).unwrap();
        let st = split_stacked(&mut g, xv, 3).unwrap();
        assert_eq!(g.shape(st), &[2, 3, 3, 4]);
        for u in 0..3 {
            let s = slice_strided(g.value(st), 1, u, 3).unwrap().reshape(&[2, 3, 4]).unwrap();
            assert_eq!(s, bundle.subs[u]);
        }
        let back = reassemble_stacked(&mut g, st).unwrap();
        assert_eq!(g.value(back), &x);
    }
}
