//! Differentiable building blocks for the stance classifier.
//!
//! Everything is double precision with hand-written backward passes; there is
//! no general autodiff. [`gradient_check`] compares every backward pass here
//! against central finite differences.

mod adam;
mod checkpoint;
mod gradcheck;
mod lstm;
mod softmax;

use rand::Rng;

use crate::{Error, Result};

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use lstm::{
    bilstm_backward, bilstm_encode, lstm_step, BiLstmTrace, EncoderStates, LstmParams, StepCache,
};
pub use softmax::{affine_backward, affine_softmax, cross_entropy, cross_entropy_grad, softmax, CE_FLOOR};

/// A parameter array with its gradient buffer, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        ParamTensor {
            shape: shape.to_vec(),
            values: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }

    pub fn from_values(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::Shape(format!(
                "{} values for shape {shape:?}",
                values.len()
            )));
        }
        Ok(ParamTensor {
            shape: shape.to_vec(),
            grad: vec![0.0; n],
            values,
        })
    }

    pub fn uniform<R: Rng>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let mut t = ParamTensor::zeros(shape);
        for v in &mut t.values {
            *v = rng.gen_range(-bound..bound);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.values[i * cols..(i + 1) * cols]
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `out += m * v` for a row-major `rows x v.len()` matrix.
pub(crate) fn matvec_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += dot(row, v);
    }
}

/// Dot product with four independent partial sums; the summation order is
/// fixed, so results are deterministic.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (a4, a_rest) = a.split_at(a.len() / 4 * 4);
    let (b4, b_rest) = b.split_at(a4.len());
    for (x, y) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = a_rest.iter().zip(b_rest).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out += m^T * v` for a row-major `v.len() x out.len()` matrix.
pub(crate) fn matvec_t_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (&scale, row) in v.iter().zip(m.chunks_exact(cols)) {
        if scale != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * scale;
            }
        }
    }
}

/// `g += u v^T` for a row-major `u.len() x v.len()` matrix.
pub(crate) fn outer_acc(g: &mut [f64], u: &[f64], v: &[f64]) {
    let cols = v.len();
    for (&scale, row) in u.iter().zip(g.chunks_exact_mut(cols)) {
        if scale != 0.0 {
            for (o, b) in row.iter_mut().zip(v) {
                *o += scale * b;
            }
        }
    }
}
