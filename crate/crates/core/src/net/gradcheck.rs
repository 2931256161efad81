//! Central finite-difference checks for every differentiable operation.
//!
//! Each check draws random small instances, contracts the op's output with a
//! random weight vector to get a scalar loss, and compares the analytic
//! gradient of every input and parameter with `(L(x+h) - L(x-h)) / 2h`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{
    avgpool_backward, avgpool_forward, conv_backward, conv_forward, dense_backward, dense_forward, gap_backward,
    gap_forward, huber_grad, huber_loss, maxpool_backward, maxpool_forward, relu_backward, relu_forward,
};
use super::lstm::{lstm_step, lstm_step_backward, LstmParams, LstmState};
use super::Tensor;

pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub op: &'static str,
    pub instances: usize,
    /// Worst `|analytic - numeric| / max(|analytic|, |numeric|)` (vector
    /// norms) over all instances.
    pub max_rel_error: f64,
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `f` at `x`.
pub fn numeric_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor {
        shape: shape.to_vec(),
        data: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Splits a packed vector back into tensors of the given shapes.
fn unpack(flat: &[f64], shapes: &[&[usize]]) -> Vec<Tensor> {
    let mut at = 0;
    shapes
        .iter()
        .map(|s| {
            let n: usize = s.iter().product();
            let t = Tensor {
                shape: s.to_vec(),
                data: flat[at..at + n].to_vec(),
            };
            at += n;
            t
        })
        .collect()
}

fn run(op: &'static str, instances: usize, seed: u64, mut one: impl FnMut(&mut ChaCha8Rng) -> f64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_rel_error = (0..instances).map(|_| one(&mut rng)).fold(0.0, f64::max);
    GradCheck {
        op,
        instances,
        max_rel_error,
    }
}

pub fn check_conv(instances: usize, seed: u64) -> GradCheck {
    run("conv", instances, seed, |rng| {
        let c = rng.gen_range(1..=3);
        let o = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=3);
        let stride = rng.gen_range(1..=2);
        let pad = rng.gen_range(0..=1);
        let (h, w) = (rng.gen_range(k.max(3)..=7), rng.gen_range(k.max(3)..=7));
        let x = random(&[c, h, w], rng);
        let wt = random(&[o, c, k, k], rng);
        let b = random(&[o], rng);
        let (y, cols) = conv_forward(&x, &wt, Some(&b), stride, pad).unwrap();
        let r = random(&y.shape, rng);
        let dy = Tensor {
            shape: y.shape.clone(),
            data: r.data.clone(),
        };
        let g = conv_backward(&x.shape, &cols, &wt, &dy, stride, pad).unwrap();
        let shapes: [&[usize]; 3] = [&x.shape, &wt.shape, &b.shape];
        let packed: Vec<f64> = [&x.data[..], &wt.data, &b.data].concat();
        let numeric = numeric_grad(
            |p| {
                let t = unpack(p, &shapes);
                dot(&conv_forward(&t[0], &t[1], Some(&t[2]), stride, pad).unwrap().0.data, &r.data)
            },
            &packed,
            STEP,
        );
        relative_error(&[&g.dx.data[..], &g.dw.data, &g.db.data].concat(), &numeric)
    })
}

pub fn check_relu(instances: usize, seed: u64) -> GradCheck {
    run("relu", instances, seed, |rng| {
        let n = rng.gen_range(2..=20);
        // Keep inputs clear of the kink at zero.
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = rng.gen_range(0.01..1.0);
                if rng.gen_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        let x = Tensor { shape: vec![n], data: x };
        let r = random(&[n], rng);
        let y = relu_forward(&x);
        let dx = relu_backward(&y, &r);
        let numeric = numeric_grad(
            |p| dot(&relu_forward(&Tensor { shape: vec![n], data: p.to_vec() }).data, &r.data),
            &x.data,
            STEP,
        );
        relative_error(&dx.data, &numeric)
    })
}

/// Distinct, well-separated values so no pooling window has a near tie.
fn separated(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 - 0.5).collect();
    v.shuffle(rng);
    Tensor {
        shape: shape.to_vec(),
        data: v,
    }
}

pub fn check_maxpool(instances: usize, seed: u64) -> GradCheck {
    run("maxpool", instances, seed, |rng| {
        let k = rng.gen_range(2..=3);
        let shape = [rng.gen_range(1..=3), rng.gen_range(k..=7), rng.gen_range(k..=7)];
        let x = separated(&shape, rng);
        let (y, arg) = maxpool_forward(&x, k).unwrap();
        let r = random(&y.shape, rng);
        let dx = maxpool_backward(&x.shape, &arg, &r);
        let numeric = numeric_grad(
            |p| {
                let t = Tensor {
                    shape: shape.to_vec(),
                    data: p.to_vec(),
                };
                dot(&maxpool_forward(&t, k).unwrap().0.data, &r.data)
            },
            &x.data,
            STEP,
        );
        relative_error(&dx.data, &numeric)
    })
}

pub fn check_avgpool(instances: usize, seed: u64) -> GradCheck {
    run("avgpool", instances, seed, |rng| {
        let k = rng.gen_range(2..=3);
        let shape = [rng.gen_range(1..=3), rng.gen_range(k..=7), rng.gen_range(k..=7)];
        let x = random(&shape, rng);
        let y = avgpool_forward(&x, k).unwrap();
        let r = random(&y.shape, rng);
        let dx = avgpool_backward(&x.shape, k, &r);
        let numeric = numeric_grad(
            |p| {
                let t = Tensor {
                    shape: shape.to_vec(),
                    data: p.to_vec(),
                };
                dot(&avgpool_forward(&t, k).unwrap().data, &r.data)
            },
            &x.data,
            STEP,
        );
        relative_error(&dx.data, &numeric)
    })
}

pub fn check_gap(instances: usize, seed: u64) -> GradCheck {
    run("global_avg_pool", instances, seed, |rng| {
        let shape = [rng.gen_range(1..=4), rng.gen_range(1..=5), rng.gen_range(1..=5)];
        let x = random(&shape, rng);
        let r = random(&[shape[0]], rng);
        let dx = gap_backward(&x.shape, &r);
        let numeric = numeric_grad(
            |p| {
                let t = Tensor {
                    shape: shape.to_vec(),
                    data: p.to_vec(),
                };
                dot(&gap_forward(&t).data, &r.data)
            },
            &x.data,
            STEP,
        );
        relative_error(&dx.data, &numeric)
    })
}

pub fn check_dense(instances: usize, seed: u64) -> GradCheck {
    run("dense", instances, seed, |rng| {
        let (n, i, o) = (rng.gen_range(1..=3), rng.gen_range(1..=5), rng.gen_range(1..=4));
        let x = random(&[n, i], rng);
        let w = random(&[o, i], rng);
        let b = random(&[o], rng);
        let r = random(&[n, o], rng);
        let g = dense_backward(&x, &w, &r);
        let shapes: [&[usize]; 3] = [&x.shape, &w.shape, &b.shape];
        let packed: Vec<f64> = [&x.data[..], &w.data, &b.data].concat();
        let numeric = numeric_grad(
            |p| {
                let t = unpack(p, &shapes);
                dot(&dense_forward(&t[0], &t[1], &t[2]).unwrap().data, &r.data)
            },
            &packed,
            STEP,
        );
        relative_error(&[&g.dx.data[..], &g.dw.data, &g.db.data].concat(), &numeric)
    })
}

pub fn check_lstm(instances: usize, seed: u64) -> GradCheck {
    run("lstm_step", instances, seed, |rng| {
        let (n, i, d) = (rng.gen_range(1..=2), rng.gen_range(1..=4), rng.gen_range(1..=4));
        let x = random(&[n, i], rng);
        let h = random(&[n, d], rng);
        let c = random(&[n, d], rng);
        let p = LstmParams {
            wx: random(&[4 * d, i], rng),
            wh: random(&[4 * d, d], rng),
            b: random(&[4 * d], rng),
        };
        let rh = random(&[n, d], rng);
        let rc = random(&[n, d], rng);
        let state = LstmState { h: h.clone(), c: c.clone() };
        let (_, cache) = lstm_step(&state, &x, &p).unwrap();
        let g = lstm_step_backward(&cache, &p, &rh, &rc);
        let shapes: [&[usize]; 6] = [&x.shape, &h.shape, &c.shape, &p.wx.shape, &p.wh.shape, &p.b.shape];
        let packed: Vec<f64> = [&x.data[..], &h.data, &c.data, &p.wx.data, &p.wh.data, &p.b.data].concat();
        let numeric = numeric_grad(
            |v| {
                let t = unpack(v, &shapes);
                let s = LstmState {
                    h: t[1].clone(),
                    c: t[2].clone(),
                };
                let q = LstmParams {
                    wx: t[3].clone(),
                    wh: t[4].clone(),
                    b: t[5].clone(),
                };
                let (next, _) = lstm_step(&s, &t[0], &q).unwrap();
                dot(&next.h.data, &rh.data) + dot(&next.c.data, &rc.data)
            },
            &packed,
            STEP,
        );
        let analytic = [
            &g.dx.data[..],
            &g.dprev.h.data,
            &g.dprev.c.data,
            &g.params.wx.data,
            &g.params.wh.data,
            &g.params.b.data,
        ]
        .concat();
        relative_error(&analytic, &numeric)
    })
}

pub fn check_huber(instances: usize, seed: u64) -> GradCheck {
    run("huber", instances, seed, |rng| {
        let kappa = rng.gen_range(0.2..2.0);
        let target = rng.gen_range(-1.0..1.0);
        // Residuals on both branches, away from the switch point.
        let e = loop {
            let e: f64 = rng.gen_range(-3.0 * kappa..3.0 * kappa);
            if (e.abs() - kappa).abs() > 1e-3 {
                break e;
            }
        };
        let pred = target + e;
        let numeric = numeric_grad(|p| huber_loss(p[0], target, kappa), &[pred], STEP);
        relative_error(&[huber_grad(pred, target, kappa)], &numeric)
    })
}

/// Every op's check with `instances` random instances each.
pub fn check_all(instances: usize, seed: u64) -> Vec<GradCheck> {
    vec![
        check_conv(instances, seed),
        check_relu(instances, seed + 1),
        check_maxpool(instances, seed + 2),
        check_avgpool(instances, seed + 3),
        check_gap(instances, seed + 4),
        check_dense(instances, seed + 5),
        check_lstm(instances, seed + 6),
        check_huber(instances, seed + 7),
    ]
}
