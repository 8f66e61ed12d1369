use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};

/// Mean squared error over every element.
pub fn mse_loss(g: &mut Graph, pred: Var, target: Var) -> Result<Var> {
    if g.shape(pred) != g.shape(target) {
        return Err(Error::shape("mse_loss", g.shape(pred), g.shape(target)));
    }
    let d = g.sub(pred, target)?;
    let sq = g.square(d)?;
    g.mean(sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn simple_values() {
        let mut g = Graph::new();
        let p = g.constant(Tensor::from_vec(vec![0.0, 0.0])).unwrap();
        let t = g.constant(Tensor::from_vec(vec![1.0, 1.0])).unwrap();
        let l = mse_loss(&mut g, p, t).unwrap();
        assert_eq!(g.value(l).item(), Some(1.0));
        let z = mse_loss(&mut g, p, p).unwrap();
        assert_eq!(g.value(z).item(), Some(0.0));
    }

    #[test]
    fn shape_mismatch() {
        let mut g = Graph::new();
        let p = g.constant(Tensor::zeros(&[2])).unwrap();
        let t = g.constant(Tensor::zeros(&[3])).unwrap();
        assert!(mse_loss(&mut g, p, t).is_err());
    }
}
