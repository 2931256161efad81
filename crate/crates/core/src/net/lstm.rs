//! LSTM cell over a batch of row vectors. Gate blocks are stacked in the
//! order input, forget, candidate, output.

use super::{gemm, NetError, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `[4d, input]`
    pub wx: Tensor,
    /// `[4d, d]`
    pub wh: Tensor,
    /// `[4d]`
    pub b: Tensor,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            wx: Tensor::zeros(&[4 * hidden, input]),
            wh: Tensor::zeros(&[4 * hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.wh.shape[1]
    }

    pub fn input(&self) -> usize {
        self.wx.shape[1]
    }
}

/// Hidden and cell state, `[N, d]` each.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        LstmState {
            h: Tensor::zeros(&[batch, hidden]),
            c: Tensor::zeros(&[batch, hidden]),
        }
    }
}

/// Values kept from the forward step for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Tensor,
    prev: LstmState,
    /// Activated gates `[N, 4d]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn lstm_step(state: &LstmState, x: &Tensor, p: &LstmParams) -> Result<(LstmState, LstmCache), NetError> {
    let d = p.hidden();
    let [n, input] = x.shape[..] else {
        return Err(NetError::Shape(format!("lstm input must be [N, I], got {:?}", x.shape)));
    };
    if input != p.input() {
        return Err(NetError::Shape(format!("lstm input width {input}, params expect {}", p.input())));
    }
    state.h.expect_shape(&[n, d], "lstm hidden state")?;
    state.c.expect_shape(&[n, d], "lstm cell state")?;
    let mut z = Vec::with_capacity(n * 4 * d);
    for _ in 0..n {
        z.extend_from_slice(&p.b.data);
    }
    gemm(n, input, 4 * d, 1.0, &x.data, false, &p.wx.data, true, 1.0, &mut z);
    gemm(n, d, 4 * d, 1.0, &state.h.data, false, &p.wh.data, true, 1.0, &mut z);
    let mut h = Tensor::zeros(&[n, d]);
    let mut c = Tensor::zeros(&[n, d]);
    let mut tanh_c = vec![0.0; n * d];
    for r in 0..n {
        let zr = &mut z[r * 4 * d..(r + 1) * 4 * d];
        for j in 0..d {
            let i = sigmoid(zr[j]);
            let f = sigmoid(zr[d + j]);
            let g = zr[2 * d + j].tanh();
            let o = sigmoid(zr[3 * d + j]);
            zr[j] = i;
            zr[d + j] = f;
            zr[2 * d + j] = g;
            zr[3 * d + j] = o;
            let cn = f * state.c.data[r * d + j] + i * g;
            let tc = cn.tanh();
            c.data[r * d + j] = cn;
            h.data[r * d + j] = o * tc;
            tanh_c[r * d + j] = tc;
        }
    }
    Ok((
        LstmState { h, c },
        LstmCache {
            x: x.clone(),
            prev: state.clone(),
            gates: z,
            tanh_c,
        },
    ))
}

pub struct LstmGrads {
    pub dx: Tensor,
    pub dprev: LstmState,
    pub params: LstmParams,
}

/// Backward through one step given gradients on the new hidden and cell
/// states.
pub fn lstm_step_backward(cache: &LstmCache, p: &LstmParams, dh: &Tensor, dc: &Tensor) -> LstmGrads {
    let d = p.hidden();
    let n = cache.x.shape[0];
    let input = p.input();
    let mut dz = vec![0.0; n * 4 * d];
    let mut dc_prev = Tensor::zeros(&[n, d]);
    for r in 0..n {
        let g = &cache.gates[r * 4 * d..(r + 1) * 4 * d];
        let dzr = &mut dz[r * 4 * d..(r + 1) * 4 * d];
        for j in 0..d {
            let k = r * d + j;
            let (i, f, gg, o) = (g[j], g[d + j], g[2 * d + j], g[3 * d + j]);
            let tc = cache.tanh_c[k];
            let dct = dc.data[k] + dh.data[k] * o * (1.0 - tc * tc);
            dzr[j] = dct * gg * i * (1.0 - i);
            dzr[d + j] = dct * cache.prev.c.data[k] * f * (1.0 - f);
            dzr[2 * d + j] = dct * i * (1.0 - gg * gg);
            dzr[3 * d + j] = dh.data[k] * tc * o * (1.0 - o);
            dc_prev.data[k] = dct * f;
        }
    }
    let mut grads = LstmParams::zeros(input, d);
    gemm(4 * d, n, input, 1.0, &dz, true, &cache.x.data, false, 0.0, &mut grads.wx.data);
    gemm(4 * d, n, d, 1.0, &dz, true, &cache.prev.h.data, false, 0.0, &mut grads.wh.data);
    for row in dz.chunks(4 * d) {
        for (acc, v) in grads.b.data.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let mut dx = Tensor::zeros(&[n, input]);
    gemm(n, 4 * d, input, 1.0, &dz, false, &p.wx.data, false, 0.0, &mut dx.data);
    let mut dh_prev = Tensor::zeros(&[n, d]);
    gemm(n, 4 * d, d, 1.0, &dz, false, &p.wh.data, false, 0.0, &mut dh_prev.data);
    LstmGrads {
        dx,
        dprev: LstmState { h: dh_prev, c: dc_prev },
        params: grads,
    }
}
