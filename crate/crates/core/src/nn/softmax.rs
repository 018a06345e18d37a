use super::{matvec_acc, matvec_t_acc, outer_acc, ParamTensor};
use crate::{Error, Result};

/// Probability floor inside the log of [`cross_entropy`].
pub const CE_FLOOR: f64 = 1e-12;

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `softmax(W h + b)`.
pub fn affine_softmax(h: &[f64], w: &ParamTensor, b: &ParamTensor) -> Result<Vec<f64>> {
    let shape = w.shape();
    if shape.len() != 2 || shape[1] != h.len() || b.shape() != [shape[0]] {
        return Err(Error::Shape(format!(
            "affine layer w{:?} b{:?} applied to input of length {}",
            shape,
            b.shape(),
            h.len()
        )));
    }
    let mut logits = b.values.clone();
    matvec_acc(&w.values, h, &mut logits);
    Ok(softmax(&logits))
}

/// `-ln(max(probs[gold], 1e-12))`.
pub fn cross_entropy(probs: &[f64], gold: usize) -> Result<f64> {
    let p = probs.get(gold).ok_or_else(|| {
        Error::InvalidArgument(format!("gold class {gold} outside {} classes", probs.len()))
    })?;
    Ok(-p.max(CE_FLOOR).ln())
}

/// Gradient of [`cross_entropy`] with respect to the logits that produced
/// `probs`. Zero when the floor is active.
pub fn cross_entropy_grad(probs: &[f64], gold: usize) -> Vec<f64> {
    if probs[gold] < CE_FLOOR {
        return vec![0.0; probs.len()];
    }
    let mut d = probs.to_vec();
    d[gold] -= 1.0;
    d
}

/// Accumulates gradients of `W h + b` and returns the gradient on `h`.
pub fn affine_backward(h: &[f64], d_logits: &[f64], w: &mut ParamTensor, b: &mut ParamTensor) -> Vec<f64> {
    outer_acc(&mut w.grad, d_logits, h);
    b.grad.iter_mut().zip(d_logits).for_each(|(g, d)| *g += d);
    let mut dh = vec![0.0; h.len()];
    matvec_t_acc(&w.values, d_logits, &mut dh);
    dh
}
