//! Independent scalar re-implementations of the recurrent encoder and finite
//! difference checks of every backward pass.

#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stance_scope::model::{check_gradients, GradCheckConfig};
use stance_scope::nn::{
    affine_backward, affine_softmax, bilstm_backward, bilstm_encode, cross_entropy, cross_entropy_grad,
    gradient_check, lstm_step, softmax, EncoderStates, LstmParams, ParamTensor,
};

fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Textbook LSTM step written with explicit index loops.
fn oracle_step(x: &[f64], h: &[f64], c: &[f64], p: &LstmParams) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let d = x.len();
    let mut pre = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (gate, out) in pre.iter_mut().enumerate() {
        for k in 0..n {
            let row = gate * n + k;
            let mut z = p.b.values[row];
            for j in 0..d {
                z += p.w.values[row * d + j] * x[j];
            }
            for j in 0..n {
                z += p.u.values[row * n + j] * h[j];
            }
            out[k] = z;
        }
    }
    let mut h_new = vec![0.0; n];
    let mut c_new = vec![0.0; n];
    for k in 0..n {
        let i = sig(pre[0][k]);
        let f = sig(pre[1][k]);
        let o = sig(pre[2][k]);
        let g = pre[3][k].tanh();
        c_new[k] = f * c[k] + i * g;
        h_new[k] = o * c_new[k].tanh();
    }
    (h_new, c_new)
}

fn oracle_bilstm(
    ids: &[usize],
    emb: &ParamTensor,
    fwd: &LstmParams,
    bwd: &LstmParams,
    init: &EncoderStates,
) -> EncoderStates {
    let d = emb.shape()[1];
    let row = |id: usize| emb.values[id * d..(id + 1) * d].to_vec();
    let (mut hf, mut cf) = (init.h_fwd.clone(), init.c_fwd.clone());
    for &id in ids {
        (hf, cf) = oracle_step(&row(id), &hf, &cf, fwd);
    }
    let (mut hb, mut cb) = (init.h_bwd.clone(), init.c_bwd.clone());
    for &id in ids.iter().rev() {
        (hb, cb) = oracle_step(&row(id), &hb, &cb, bwd);
    }
    EncoderStates { h_fwd: hf, c_fwd: cf, h_bwd: hb, c_bwd: cb }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

fn random_lstm(rng: &mut ChaCha8Rng, d: usize, h: usize) -> LstmParams {
    let mut p = LstmParams::init(d, h, 0.8, rng);
    p.b.values = random_vec(rng, 4 * h, 0.5);
    p
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn lstm_step_matches_scalar_oracle_on_100_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let d = rng.gen_range(1..9);
        let h = rng.gen_range(1..9);
        let p = random_lstm(&mut rng, d, h);
        let x = random_vec(&mut rng, d, 2.0);
        let h0 = random_vec(&mut rng, h, 1.0);
        let c0 = random_vec(&mut rng, h, 2.0);
        let (h1, c1) = lstm_step(&x, &h0, &c0, &p).unwrap();
        let (oh, oc) = oracle_step(&x, &h0, &c0, &p);
        assert!(max_abs_diff(&h1, &oh) <= 1e-10);
        assert!(max_abs_diff(&c1, &oc) <= 1e-10);
    }
}

#[test]
fn bilstm_encode_matches_scalar_oracle_on_100_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..100 {
        let (vocab, d, h) = (rng.gen_range(2..12), rng.gen_range(1..7), rng.gen_range(1..7));
        let len = rng.gen_range(1..10);
        let emb = ParamTensor::from_values(&[vocab, d], random_vec(&mut rng, vocab * d, 1.0)).unwrap();
        let fwd = random_lstm(&mut rng, d, h);
        let bwd = random_lstm(&mut rng, d, h);
        let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(0..vocab)).collect();
        let init = if case % 2 == 0 {
            EncoderStates::zeros(h)
        } else {
            EncoderStates {
                h_fwd: random_vec(&mut rng, h, 1.0),
                c_fwd: random_vec(&mut rng, h, 1.0),
                h_bwd: random_vec(&mut rng, h, 1.0),
                c_bwd: random_vec(&mut rng, h, 1.0),
            }
        };
        let got = bilstm_encode(&ids, &emb, &fwd, &bwd, Some(&init)).unwrap().final_states;
        let want = oracle_bilstm(&ids, &emb, &fwd, &bwd, &init);
        for (a, b) in [
            (&got.h_fwd, &want.h_fwd),
            (&got.c_fwd, &want.c_fwd),
            (&got.h_bwd, &want.h_bwd),
            (&got.c_bwd, &want.c_bwd),
        ] {
            assert!(max_abs_diff(a, b) <= 1e-10, "case {case}");
        }
    }
}

fn flatten(p: &LstmParams) -> Vec<f64> {
    p.tensors().iter().flat_map(|t| t.values.iter().copied()).collect()
}

fn unflatten(template: &LstmParams, flat: &[f64]) -> LstmParams {
    let mut p = template.clone();
    let mut offset = 0;
    for t in p.tensors_mut() {
        let n = t.len();
        t.values.copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    }
    p
}

#[test]
fn lstm_step_gradients_over_ten_seeds() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, h) = (4, 3);
        let mut p = random_lstm(&mut rng, d, h);
        let x = random_vec(&mut rng, d, 1.0);
        let h0 = random_vec(&mut rng, h, 1.0);
        let c0 = random_vec(&mut rng, h, 1.0);
        let (wh, wc) = (random_vec(&mut rng, h, 1.0), random_vec(&mut rng, h, 1.0));
        let objective = |p: &LstmParams, x: &[f64], h0: &[f64], c0: &[f64]| {
            let (h1, c1) = lstm_step(x, h0, c0, p).unwrap();
            h1.iter().zip(&wh).map(|(a, b)| a * b).sum::<f64>() + c1.iter().zip(&wc).map(|(a, b)| a * b).sum::<f64>()
        };

        let cache = p.step(&x, &h0, &c0).unwrap();
        let (dx, dh0, dc0) = p.step_backward(&cache, &wh, &wc);
        let analytic: Vec<f64> = p.tensors().iter().flat_map(|t| t.grad.iter().copied()).collect();
        let template = p.clone();
        let r = gradient_check(&flatten(&p), &analytic, 1e-5, |th| objective(&unflatten(&template, th), &x, &h0, &c0))
            .unwrap();
        assert!(r.max_rel_error < 1e-6, "seed {seed} params: {r:?}");

        let r = gradient_check(&x, &dx, 1e-5, |v| objective(&template, v, &h0, &c0)).unwrap();
        assert!(r.max_rel_error < 1e-6, "seed {seed} x: {r:?}");
        let r = gradient_check(&h0, &dh0, 1e-5, |v| objective(&template, &x, v, &c0)).unwrap();
        assert!(r.max_rel_error < 1e-6, "seed {seed} h: {r:?}");
        let r = gradient_check(&c0, &dc0, 1e-5, |v| objective(&template, &x, &h0, v)).unwrap();
        assert!(r.max_rel_error < 1e-6, "seed {seed} c: {r:?}");
    }
}

#[test]
fn bilstm_gradients_over_ten_seeds() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (vocab, d, h, len) = (6, 3, 3, 5);
        let emb = ParamTensor::from_values(&[vocab, d], random_vec(&mut rng, vocab * d, 1.0)).unwrap();
        let mut fwd = random_lstm(&mut rng, d, h);
        let mut bwd = random_lstm(&mut rng, d, h);
        let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(0..vocab)).collect();
        let weights: Vec<f64> = random_vec(&mut rng, 4 * h, 1.0);
        let init = EncoderStates {
            h_fwd: random_vec(&mut rng, h, 0.5),
            c_fwd: random_vec(&mut rng, h, 0.5),
            h_bwd: random_vec(&mut rng, h, 0.5),
            c_bwd: random_vec(&mut rng, h, 0.5),
        };
        let project = |s: &EncoderStates| -> f64 {
            s.h_fwd
                .iter()
                .chain(&s.c_fwd)
                .chain(&s.h_bwd)
                .chain(&s.c_bwd)
                .zip(&weights)
                .map(|(a, b)| a * b)
                .sum()
        };
        let d_final = EncoderStates {
            h_fwd: weights[..h].to_vec(),
            c_fwd: weights[h..2 * h].to_vec(),
            h_bwd: weights[2 * h..3 * h].to_vec(),
            c_bwd: weights[3 * h..].to_vec(),
        };

        let mut emb_g = emb.clone();
        let trace = bilstm_encode(&ids, &emb, &fwd, &bwd, Some(&init)).unwrap();
        let d_init = bilstm_backward(&trace, &d_final, &mut fwd, &mut bwd, &mut emb_g);

        let mut theta = emb.values.clone();
        theta.extend(flatten(&fwd));
        theta.extend(flatten(&bwd));
        let mut analytic = emb_g.grad.clone();
        for p in [&fwd, &bwd] {
            analytic.extend(p.tensors().iter().flat_map(|t| t.grad.iter().copied()));
        }
        let (nf, ne) = (flatten(&fwd).len(), emb.len());
        let (tf, tb) = (fwd.clone(), bwd.clone());
        let r = gradient_check(&theta, &analytic, 1e-5, |th| {
            let e = ParamTensor::from_values(&[vocab, d], th[..ne].to_vec()).unwrap();
            let f = unflatten(&tf, &th[ne..ne + nf]);
            let b = unflatten(&tb, &th[ne + nf..]);
            project(&bilstm_encode(&ids, &e, &f, &b, Some(&init)).unwrap().final_states)
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-6, "seed {seed}: {r:?}");

        let init_flat: Vec<f64> = [&init.h_fwd, &init.c_fwd, &init.h_bwd, &init.c_bwd]
            .into_iter()
            .flatten()
            .copied()
            .collect();
        let d_init_flat: Vec<f64> = [&d_init.h_fwd, &d_init.c_fwd, &d_init.h_bwd, &d_init.c_bwd]
            .into_iter()
            .flatten()
            .copied()
            .collect();
        let r = gradient_check(&init_flat, &d_init_flat, 1e-5, |v| {
            let s = EncoderStates {
                h_fwd: v[..h].to_vec(),
                c_fwd: v[h..2 * h].to_vec(),
                h_bwd: v[2 * h..3 * h].to_vec(),
                c_bwd: v[3 * h..].to_vec(),
            };
            project(&bilstm_encode(&ids, &emb, &tf, &tb, Some(&s)).unwrap().final_states)
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-6, "seed {seed} init: {r:?}");
    }
}

#[test]
fn softmax_cross_entropy_gradients_over_ten_seeds() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let n = 6;
        let h = random_vec(&mut rng, n, 1.0);
        let mut w = ParamTensor::from_values(&[3, n], random_vec(&mut rng, 3 * n, 1.0)).unwrap();
        let mut b = ParamTensor::from_values(&[3], random_vec(&mut rng, 3, 1.0)).unwrap();
        let gold = rng.gen_range(0..3);
        let probs = affine_softmax(&h, &w, &b).unwrap();
        let dh = affine_backward(&h, &cross_entropy_grad(&probs, gold), &mut w, &mut b);

        let mut theta = w.values.clone();
        theta.extend(&b.values);
        theta.extend(&h);
        let mut analytic = w.grad.clone();
        analytic.extend(&b.grad);
        analytic.extend(&dh);
        let r = gradient_check(&theta, &analytic, 1e-5, |th| {
            let w = ParamTensor::from_values(&[3, n], th[..3 * n].to_vec()).unwrap();
            let b = ParamTensor::from_values(&[3], th[3 * n..3 * n + 3].to_vec()).unwrap();
            cross_entropy(&affine_softmax(&th[3 * n + 3..], &w, &b).unwrap(), gold).unwrap()
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-6, "seed {seed}: {r:?}");
    }
}

#[test]
fn full_model_gradients_over_ten_seeds() {
    for seed in 0..10u64 {
        let r = check_gradients(GradCheckConfig::default(), seed).unwrap();
        assert!(r.max_rel_error < 1e-4, "seed {seed}: {r:?}");
    }
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0f64..50.0, 1..8)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn softmax_is_shift_invariant(logits in prop::collection::vec(-20.0f64..20.0, 1..8), shift in -100.0f64..100.0) {
        let a = softmax(&logits);
        let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
        let b = softmax(&shifted);
        prop_assert!(max_abs_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn cross_entropy_is_non_negative_and_finite(logits in prop::collection::vec(-800.0f64..800.0, 3), gold in 0usize..3) {
        let ce = cross_entropy(&softmax(&logits), gold).unwrap();
        prop_assert!(ce.is_finite() && ce >= 0.0);
        prop_assert!(ce <= -(1e-12f64).ln() + 1e-9);
    }

    #[test]
    fn lstm_hidden_state_is_bounded(seed in any::<u64>(), scale in 0.1f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_lstm(&mut rng, 3, 4);
        let x = random_vec(&mut rng, 3, scale);
        let (h, _) = lstm_step(&x, &[0.0; 4], &[0.0; 4], &p).unwrap();
        prop_assert!(h.iter().all(|v| v.abs() < 1.0));
    }
}
