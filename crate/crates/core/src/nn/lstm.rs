use rand::Rng;

use super::{matvec_acc, matvec_t_acc, outer_acc, sigmoid, ParamTensor};
use crate::{Error, Result};

/// One LSTM direction. Gate blocks are stacked in the order input, forget,
/// output, candidate: rows `[0, h)` are the input gate, `[h, 2h)` forget, and
/// so on.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// Input weights, `4h x d`.
    pub w: ParamTensor,
    /// Recurrent weights, `4h x h`.
    pub u: ParamTensor,
    /// Bias, `4h`.
    pub b: ParamTensor,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w: ParamTensor::zeros(&[4 * hidden, input]),
            u: ParamTensor::zeros(&[4 * hidden, hidden]),
            b: ParamTensor::zeros(&[4 * hidden]),
        }
    }

    /// Weights uniform in `(-bound, bound)`, forget-gate bias 1.
    pub fn init<R: Rng>(input: usize, hidden: usize, bound: f64, rng: &mut R) -> Self {
        let mut p = LstmParams {
            w: ParamTensor::uniform(&[4 * hidden, input], bound, rng),
            u: ParamTensor::uniform(&[4 * hidden, hidden], bound, rng),
            b: ParamTensor::zeros(&[4 * hidden]),
        };
        p.b.values[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        p
    }

    pub fn from_tensors(w: ParamTensor, u: ParamTensor, b: ParamTensor) -> Result<Self> {
        let (wr, ur) = (w.shape(), u.shape());
        let ok = wr.len() == 2
            && ur.len() == 2
            && b.shape().len() == 1
            && wr[0] % 4 == 0
            && ur[0] == wr[0]
            && ur[1] * 4 == ur[0]
            && b.shape()[0] == wr[0];
        if !ok {
            return Err(Error::Shape(format!(
                "inconsistent LSTM tensors w{:?} u{:?} b{:?}",
                wr,
                ur,
                b.shape()
            )));
        }
        Ok(LstmParams { w, u, b })
    }

    pub fn input_dim(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.u.shape()[1]
    }

    pub fn tensors(&self) -> [&ParamTensor; 3] {
        [&self.w, &self.u, &self.b]
    }

    pub fn tensors_mut(&mut self) -> [&mut ParamTensor; 3] {
        [&mut self.w, &mut self.u, &mut self.b]
    }

    pub fn zero_grad(&mut self) {
        self.tensors_mut().into_iter().for_each(ParamTensor::zero_grad);
    }

    fn check(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<()> {
        let hidden = self.hidden();
        if x.len() != self.input_dim() || h.len() != hidden || c.len() != hidden {
            return Err(Error::Shape(format!(
                "lstm step expects x[{}], h[{hidden}], c[{hidden}]; got x[{}], h[{}], c[{}]",
                self.input_dim(),
                x.len(),
                h.len(),
                c.len()
            )));
        }
        Ok(())
    }

    /// Forward step, keeping what the backward pass needs.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<StepCache> {
        self.check(x, h, c)?;
        let hidden = self.hidden();
        let mut z = self.b.values.clone();
        matvec_acc(&self.w.values, x, &mut z);
        matvec_acc(&self.u.values, h, &mut z);
        let (zi, rest) = z.split_at_mut(hidden);
        let (zf, rest) = rest.split_at_mut(hidden);
        let (zo, zg) = rest.split_at_mut(hidden);
        zi.iter_mut().for_each(|v| *v = sigmoid(*v));
        zf.iter_mut().for_each(|v| *v = sigmoid(*v));
        zo.iter_mut().for_each(|v| *v = sigmoid(*v));
        zg.iter_mut().for_each(|v| *v = v.tanh());

        let mut c_new = vec![0.0; hidden];
        let mut tanh_c = vec![0.0; hidden];
        let mut h_new = vec![0.0; hidden];
        for k in 0..hidden {
            c_new[k] = zf[k] * c[k] + zi[k] * zg[k];
            tanh_c[k] = c_new[k].tanh();
            h_new[k] = zo[k] * tanh_c[k];
        }
        Ok(StepCache {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            c_prev: c.to_vec(),
            gates: z,
            c: c_new,
            tanh_c,
            h: h_new,
        })
    }

    /// Backward step. Accumulates parameter gradients and returns the
    /// gradients with respect to `(x, h_prev, c_prev)`.
    pub fn step_backward(
        &mut self,
        cache: &StepCache,
        dh: &[f64],
        dc: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hidden = self.hidden();
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * hidden];
        let mut dc_prev = vec![0.0; hidden];
        for k in 0..hidden {
            let (i, f, o, cand) = (g[k], g[hidden + k], g[2 * hidden + k], g[3 * hidden + k]);
            let t = cache.tanh_c[k];
            let d_o = dh[k] * t;
            let dct = dc[k] + dh[k] * o * (1.0 - t * t);
            let di = dct * cand;
            let df = dct * cache.c_prev[k];
            let dg = dct * i;
            dc_prev[k] = dct * f;
            dz[k] = di * i * (1.0 - i);
            dz[hidden + k] = df * f * (1.0 - f);
            dz[2 * hidden + k] = d_o * o * (1.0 - o);
            dz[3 * hidden + k] = dg * (1.0 - cand * cand);
        }
        outer_acc(&mut self.w.grad, &dz, &cache.x);
        outer_acc(&mut self.u.grad, &dz, &cache.h_prev);
        self.b.grad.iter_mut().zip(&dz).for_each(|(b, d)| *b += d);
        let mut dx = vec![0.0; cache.x.len()];
        matvec_t_acc(&self.w.values, &dz, &mut dx);
        let mut dh_prev = vec![0.0; hidden];
        matvec_t_acc(&self.u.values, &dz, &mut dh_prev);
        (dx, dh_prev, dc_prev)
    }
}

/// Forward-pass record of one LSTM step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i, f, o, g]`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Single LSTM step: `c' = f*c + i*g`, `h' = o*tanh(c')`.
pub fn lstm_step(x: &[f64], h: &[f64], c: &[f64], params: &LstmParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let cache = params.step(x, h, c)?;
    Ok((cache.h, cache.c))
}

/// Hidden and cell state of both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStates {
    pub h_fwd: Vec<f64>,
    pub c_fwd: Vec<f64>,
    pub h_bwd: Vec<f64>,
    pub c_bwd: Vec<f64>,
}

impl EncoderStates {
    pub fn zeros(hidden: usize) -> Self {
        EncoderStates {
            h_fwd: vec![0.0; hidden],
            c_fwd: vec![0.0; hidden],
            h_bwd: vec![0.0; hidden],
            c_bwd: vec![0.0; hidden],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmTrace {
    pub ids: Vec<usize>,
    /// Forward caches in position order.
    pub fwd: Vec<StepCache>,
    /// Backward caches in processing order (last position first).
    pub bwd: Vec<StepCache>,
    pub final_states: EncoderStates,
}

impl BiLstmTrace {
    /// Forward hidden state at every position, left to right.
    pub fn forward_states(&self) -> impl Iterator<Item = &[f64]> {
        self.fwd.iter().map(|c| c.h.as_slice())
    }

    /// Backward hidden state at every position, left to right.
    pub fn backward_states(&self) -> impl Iterator<Item = &[f64]> {
        self.bwd.iter().rev().map(|c| c.h.as_slice())
    }
}

/// Runs the forward direction left to right and the backward direction right
/// to left over the embedded tokens. `init` seeds each direction's initial
/// `(h, c)`; zeros otherwise. The final backward state is the one reached
/// after reading position 0.
pub fn bilstm_encode(
    ids: &[usize],
    embedding: &ParamTensor,
    fwd: &LstmParams,
    bwd: &LstmParams,
    init: Option<&EncoderStates>,
) -> Result<BiLstmTrace> {
    if ids.is_empty() {
        return Err(Error::InvalidArgument("cannot encode an empty sequence".into()));
    }
    if embedding.shape().len() != 2 || embedding.shape()[1] != fwd.input_dim() || bwd.input_dim() != fwd.input_dim() {
        return Err(Error::Shape(format!(
            "embedding {:?} incompatible with LSTM input {}/{}",
            embedding.shape(),
            fwd.input_dim(),
            bwd.input_dim()
        )));
    }
    let vocab = embedding.shape()[0];
    if let Some(&bad) = ids.iter().find(|&&id| id >= vocab) {
        return Err(Error::InvalidArgument(format!("token id {bad} outside vocabulary of {vocab}")));
    }
    let zeros = EncoderStates::zeros(fwd.hidden());
    let init = init.unwrap_or(&zeros);

    let mut fwd_caches = Vec::with_capacity(ids.len());
    let (mut h, mut c) = (init.h_fwd.clone(), init.c_fwd.clone());
    for &id in ids {
        let cache = fwd.step(embedding.row(id), &h, &c)?;
        h.clone_from(&cache.h);
        c.clone_from(&cache.c);
        fwd_caches.push(cache);
    }
    let (h_fwd, c_fwd) = (h, c);

    let mut bwd_caches = Vec::with_capacity(ids.len());
    let (mut h, mut c) = (init.h_bwd.clone(), init.c_bwd.clone());
    for &id in ids.iter().rev() {
        let cache = bwd.step(embedding.row(id), &h, &c)?;
        h.clone_from(&cache.h);
        c.clone_from(&cache.c);
        bwd_caches.push(cache);
    }

    Ok(BiLstmTrace {
        ids: ids.to_vec(),
        fwd: fwd_caches,
        bwd: bwd_caches,
        final_states: EncoderStates { h_fwd, c_fwd, h_bwd: h, c_bwd: c },
    })
}

/// Backpropagates gradients on the final states through both directions.
/// Parameter and embedding gradients are accumulated; the returned states
/// hold the gradients with respect to the initial `(h, c)` of each direction.
pub fn bilstm_backward(
    trace: &BiLstmTrace,
    d_final: &EncoderStates,
    fwd: &mut LstmParams,
    bwd: &mut LstmParams,
    embedding: &mut ParamTensor,
) -> EncoderStates {
    let dim = embedding.shape()[1];
    let mut run = |params: &mut LstmParams, caches: &[StepCache], ids: &mut dyn Iterator<Item = usize>, dh0: &[f64], dc0: &[f64]| {
        let (mut dh, mut dc) = (dh0.to_vec(), dc0.to_vec());
        for (cache, id) in caches.iter().rev().zip(ids) {
            let (dx, dh_prev, dc_prev) = params.step_backward(cache, &dh, &dc);
            let row = &mut embedding.grad[id * dim..(id + 1) * dim];
            row.iter_mut().zip(&dx).for_each(|(g, d)| *g += d);
            dh = dh_prev;
            dc = dc_prev;
        }
        (dh, dc)
    };
    let (h_fwd, c_fwd) = run(fwd, &trace.fwd, &mut trace.ids.iter().rev().copied(), &d_final.h_fwd, &d_final.c_fwd);
    let (h_bwd, c_bwd) = run(bwd, &trace.bwd, &mut trace.ids.iter().copied(), &d_final.h_bwd, &d_final.c_bwd);
    EncoderStates { h_fwd, c_fwd, h_bwd, c_bwd }
}
