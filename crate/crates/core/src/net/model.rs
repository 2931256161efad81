//! The clip regressor and its backpropagation through time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    conv_backward, conv_forward, dense_backward, dense_forward, gap_backward, gap_forward, huber_grad, huber_loss,
    maxpool_backward, maxpool_forward, relu_backward, relu_forward,
};
use super::lstm::{lstm_step, lstm_step_backward, LstmCache, LstmParams, LstmState};
use super::{NetError, Tensor};
use crate::config::{Config, NetworkSection};
use crate::mechanics::Shore00;
use crate::pipeline::{SelectedClip, CLIP_LEN};
use crate::render::TactileFrame;

const KERNEL: usize = 3;
const POOL: usize = 2;

/// Layer sizes and the input/label normalisation baked into a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub frame_width: usize,
    pub frame_height: usize,
    pub input_pool: usize,
    pub conv_channels: Vec<usize>,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub input_scale: f64,
    pub label_scale: f64,
}

impl Architecture {
    pub fn from_config(cfg: &Config) -> Self {
        Architecture::new(cfg.gel.image_width_px, cfg.gel.image_height_px, &cfg.network)
    }

    pub fn new(frame_width: usize, frame_height: usize, n: &NetworkSection) -> Self {
        Architecture {
            frame_width,
            frame_height,
            input_pool: n.input_pool,
            conv_channels: n.conv_channels.clone(),
            feature_dim: n.feature_dim,
            hidden_dim: n.hidden_dim,
            input_scale: n.input_scale,
            label_scale: n.label_scale,
        }
    }

    /// Spatial size entering the first convolution.
    pub fn input_extent(&self) -> (usize, usize) {
        (self.frame_height / self.input_pool, self.frame_width / self.input_pool)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let (mut h, mut w) = self.input_extent();
        if self.input_pool == 0 || self.conv_channels.is_empty() || self.feature_dim == 0 || self.hidden_dim == 0 {
            return Err(NetError::Shape("architecture has an empty layer".into()));
        }
        for _ in &self.conv_channels {
            if h < POOL || w < POOL {
                return Err(NetError::Shape(format!(
                    "{}x{} frames are too small for {} conv blocks",
                    self.frame_width,
                    self.frame_height,
                    self.conv_channels.len()
                )));
            }
            h /= POOL;
            w /= POOL;
        }
        Ok(())
    }

    /// Names and shapes of every parameter tensor, in storage order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut c_in = 3;
        for (i, &c) in self.conv_channels.iter().enumerate() {
            out.push((format!("conv{i}.w"), vec![c, c_in, KERNEL, KERNEL]));
            out.push((format!("conv{i}.b"), vec![c]));
            c_in = c;
        }
        let (f, d) = (self.feature_dim, self.hidden_dim);
        out.push(("dense.w".into(), vec![f, c_in]));
        out.push(("dense.b".into(), vec![f]));
        out.push(("lstm.wx".into(), vec![4 * d, f]));
        out.push(("lstm.wh".into(), vec![4 * d, d]));
        out.push(("lstm.b".into(), vec![4 * d]));
        out.push(("head.w".into(), vec![1, d]));
        out.push(("head.b".into(), vec![1]));
        out
    }
}

/// Parameters stored as a flat list matching [`Architecture::parameter_shapes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub params: Vec<Tensor>,
}

struct BlockCache {
    in_shape: Vec<usize>,
    cols: Vec<f64>,
    relu_out: Tensor,
    argmax: Vec<usize>,
}

struct ImageCache {
    blocks: Vec<BlockCache>,
    gap_shape: Vec<usize>,
}

/// Everything the backward pass needs from a batched forward pass.
pub struct ForwardCache {
    batch: usize,
    images: Vec<ImageCache>,
    /// Unique-image index of frame `t` of clip `n`, at `t * batch + n`.
    image_of: Vec<usize>,
    gap_out: Tensor,
    features: Tensor,
    steps: Vec<LstmCache>,
    hidden: Vec<Tensor>,
}

impl Model {
    /// Fan-in scaled uniform initialisation; the forget gate starts open.
    pub fn init<R: Rng>(arch: Architecture, forget_bias: f64, rng: &mut R) -> Result<Self, NetError> {
        arch.validate()?;
        let d = arch.hidden_dim;
        let mut params = Vec::new();
        for (name, shape) in arch.parameter_shapes() {
            let mut t = Tensor::zeros(&shape);
            let fan_in: usize = shape[1..].iter().product();
            let limit = if name.starts_with("lstm") || name.starts_with("head") {
                1.0 / (d as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            if shape.len() > 1 {
                t.data.iter_mut().for_each(|v| *v = rng.gen_range(-limit..limit));
            }
            match name.as_str() {
                "lstm.b" => t.data[d..2 * d].iter_mut().for_each(|v| *v = forget_bias),
                "head.b" => t.data[0] = 0.5,
                _ => {}
            }
            params.push(t);
        }
        Ok(Model { arch, params })
    }

    /// Model with every parameter zero.
    pub fn zeros(arch: Architecture) -> Result<Self, NetError> {
        arch.validate()?;
        let params = arch.parameter_shapes().iter().map(|(_, s)| Tensor::zeros(s)).collect();
        Ok(Model { arch, params })
    }

    fn blocks(&self) -> usize {
        self.arch.conv_channels.len()
    }

    fn dense_index(&self) -> usize {
        2 * self.blocks()
    }

    pub fn lstm_params(&self) -> LstmParams {
        let i = self.dense_index() + 2;
        LstmParams {
            wx: self.params[i].clone(),
            wh: self.params[i + 1].clone(),
            b: self.params[i + 2].clone(),
        }
    }

    pub fn head_bias_mut(&mut self) -> &mut f64 {
        let i = self.params.len() - 1;
        &mut self.params[i].data[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Average-pools and scales a frame into the first layer's input.
    pub fn prepare_frame(&self, frame: &TactileFrame) -> Result<Tensor, NetError> {
        let a = &self.arch;
        if frame.width != a.frame_width || frame.height != a.frame_height {
            return Err(NetError::Shape(format!(
                "frame is {}x{}, model expects {}x{}",
                frame.width, frame.height, a.frame_width, a.frame_height
            )));
        }
        let p = a.input_pool;
        let (oh, ow) = a.input_extent();
        let norm = a.input_scale / (p * p) as f64;
        let mut x = Tensor::zeros(&[3, oh, ow]);
        for oy in 0..oh {
            for dy in 0..p {
                let row = &frame.data[(oy * p + dy) * frame.width * 3..];
                for ox in 0..ow {
                    for dx in 0..p {
                        let px = &row[(ox * p + dx) * 3..(ox * p + dx) * 3 + 3];
                        for c in 0..3 {
                            x.data[(c * oh + oy) * ow + ox] += px[c] * norm;
                        }
                    }
                }
            }
        }
        Ok(x)
    }

    fn encode(&self, x: Tensor) -> Result<(Tensor, ImageCache), NetError> {
        let mut blocks = Vec::with_capacity(self.blocks());
        let mut cur = x;
        for i in 0..self.blocks() {
            let (y, cols) = conv_forward(&cur, &self.params[2 * i], Some(&self.params[2 * i + 1]), 1, KERNEL / 2)?;
            let relu_out = relu_forward(&y);
            let (pooled, argmax) = maxpool_forward(&relu_out, POOL)?;
            blocks.push(BlockCache {
                in_shape: cur.shape.clone(),
                cols,
                relu_out,
                argmax,
            });
            cur = pooled;
        }
        let gap_shape = cur.shape.clone();
        Ok((gap_forward(&cur), ImageCache { blocks, gap_shape }))
    }

    fn encode_backward(&self, cache: &ImageCache, dgap: &Tensor, grads: &mut [Tensor]) -> Result<(), NetError> {
        let mut d = gap_backward(&cache.gap_shape, dgap);
        for (i, b) in cache.blocks.iter().enumerate().rev() {
            let drelu = maxpool_backward(&b.relu_out.shape, &b.argmax, &d);
            let dy = relu_backward(&b.relu_out, &drelu);
            let g = conv_backward(&b.in_shape, &b.cols, &self.params[2 * i], &dy, 1, KERNEL / 2)?;
            for (acc, v) in grads[2 * i].data.iter_mut().zip(&g.dw.data) {
                *acc += v;
            }
            for (acc, v) in grads[2 * i + 1].data.iter_mut().zip(&g.db.data) {
                *acc += v;
            }
            d = g.dx;
        }
        Ok(())
    }

    /// Normalised per-step outputs for a batch of clips (hardness divided by
    /// the label scale).
    pub fn forward_batch(&self, clips: &[&SelectedClip]) -> Result<(Vec<[f64; CLIP_LEN]>, ForwardCache), NetError> {
        let n = clips.len();
        let mut images = Vec::new();
        let mut gap_rows = Vec::new();
        let mut image_of = vec![0; CLIP_LEN * n];
        // All-zero frames (every clip's baseline frame) share one encoding.
        let mut zero_image: Option<usize> = None;
        for t in 0..CLIP_LEN {
            for (b, clip) in clips.iter().enumerate() {
                if clip.frames.len() != CLIP_LEN {
                    return Err(NetError::Shape(format!("clip has {} frames", clip.frames.len())));
                }
                let frame = &clip.frames[t];
                let is_zero = frame.data.iter().all(|v| *v == 0.0);
                if is_zero {
                    if let Some(z) = zero_image {
                        image_of[t * n + b] = z;
                        continue;
                    }
                }
                let (g, cache) = self.encode(self.prepare_frame(frame)?)?;
                image_of[t * n + b] = images.len();
                if is_zero {
                    zero_image = Some(images.len());
                }
                images.push(cache);
                gap_rows.extend_from_slice(&g.data);
            }
        }
        let c_last = *self.arch.conv_channels.last().expect("validated");
        let gap_out = Tensor::from_vec(&[images.len(), c_last], gap_rows)?;
        let di = self.dense_index();
        let features = relu_forward(&dense_forward(&gap_out, &self.params[di], &self.params[di + 1])?);
        let f = self.arch.feature_dim;
        let lstm = self.lstm_params();
        let head_w = &self.params[di + 5];
        let head_b = self.params[di + 6].data[0];
        let mut state = LstmState::zeros(n, self.arch.hidden_dim);
        let mut steps = Vec::with_capacity(CLIP_LEN);
        let mut hidden = Vec::with_capacity(CLIP_LEN);
        let mut out = vec![[0.0; CLIP_LEN]; n];
        for t in 0..CLIP_LEN {
            let mut x = Tensor::zeros(&[n, f]);
            for b in 0..n {
                let m = image_of[t * n + b];
                x.data[b * f..(b + 1) * f].copy_from_slice(&features.data[m * f..(m + 1) * f]);
            }
            let (next, cache) = lstm_step(&state, &x, &lstm)?;
            for (b, row) in next.h.data.chunks(self.arch.hidden_dim).enumerate() {
                out[b][t] = head_b + row.iter().zip(&head_w.data).map(|(h, w)| h * w).sum::<f64>();
            }
            hidden.push(next.h.clone());
            steps.push(cache);
            state = next;
        }
        Ok((
            out,
            ForwardCache {
                batch: n,
                images,
                image_of,
                gap_out,
                features,
                steps,
                hidden,
            },
        ))
    }

    /// Gradients of a loss given its derivative with respect to every
    /// normalised output.
    pub fn backward(&self, cache: &ForwardCache, dout: &[[f64; CLIP_LEN]]) -> Result<Vec<Tensor>, NetError> {
        let n = cache.batch;
        let d = self.arch.hidden_dim;
        let f = self.arch.feature_dim;
        let di = self.dense_index();
        let mut grads: Vec<Tensor> = self.params.iter().map(|p| Tensor::zeros(&p.shape)).collect();
        let head_w = self.params[di + 5].data.clone();
        let lstm = self.lstm_params();
        let mut dh_next = Tensor::zeros(&[n, d]);
        let mut dc_next = Tensor::zeros(&[n, d]);
        let mut dfeat = Tensor::zeros(&cache.features.shape);
        for t in (0..CLIP_LEN).rev() {
            let mut dh = dh_next;
            for b in 0..n {
                let g = dout[b][t];
                grads[di + 6].data[0] += g;
                let h = &cache.hidden[t].data[b * d..(b + 1) * d];
                for j in 0..d {
                    grads[di + 5].data[j] += g * h[j];
                    dh.data[b * d + j] += g * head_w[j];
                }
            }
            let g = lstm_step_backward(&cache.steps[t], &lstm, &dh, &dc_next);
            for (k, src) in [(di + 2, &g.params.wx), (di + 3, &g.params.wh), (di + 4, &g.params.b)] {
                for (acc, v) in grads[k].data.iter_mut().zip(&src.data) {
                    *acc += v;
                }
            }
            for b in 0..n {
                let m = cache.image_of[t * n + b];
                for (acc, v) in dfeat.data[m * f..(m + 1) * f].iter_mut().zip(&g.dx.data[b * f..(b + 1) * f]) {
                    *acc += v;
                }
            }
            dh_next = g.dprev.h;
            dc_next = g.dprev.c;
        }
        let dpre = relu_backward(&cache.features, &dfeat);
        let dg = dense_backward(&cache.gap_out, &self.params[di], &dpre);
        grads[di] = dg.dw;
        grads[di + 1] = dg.db;
        let c_last = cache.gap_out.shape[1];
        for (m, image) in cache.images.iter().enumerate() {
            let dgap = Tensor {
                shape: vec![c_last],
                data: dg.dx.data[m * c_last..(m + 1) * c_last].to_vec(),
            };
            self.encode_backward(image, &dgap, &mut grads)?;
        }
        Ok(grads)
    }

    /// Per-step hardness estimates `y_1..y_5` in Shore 00.
    pub fn forward_clip(&self, clip: &SelectedClip) -> Result<[f64; CLIP_LEN], NetError> {
        let (out, _) = self.forward_batch(&[clip])?;
        Ok(out[0].map(|v| v * self.arch.label_scale))
    }

    pub fn predict(&self, clip: &SelectedClip) -> Result<Shore00, NetError> {
        Ok(predict_hardness(&self.forward_clip(clip)?))
    }
}

/// Mean of the last three per-step estimates, clamped to `[0, 100]`.
pub fn predict_hardness(y: &[f64; CLIP_LEN]) -> Shore00 {
    Shore00::saturating((y[2] + y[3] + y[4]) / 3.0)
}

/// Mean per-step Huber loss over a batch and its gradient on every output.
/// Targets are in the same normalised units as the outputs.
pub fn clip_loss(out: &[[f64; CLIP_LEN]], targets: &[f64], kappa: f64) -> (f64, Vec<[f64; CLIP_LEN]>) {
    let norm = 1.0 / (out.len() * CLIP_LEN) as f64;
    let mut loss = 0.0;
    let mut grad = vec![[0.0; CLIP_LEN]; out.len()];
    for ((y, t), g) in out.iter().zip(targets).zip(grad.iter_mut()) {
        for k in 0..CLIP_LEN {
            loss += huber_loss(y[k], *t, kappa) * norm;
            g[k] = huber_grad(y[k], *t, kappa) * norm;
        }
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tiny_arch() -> Architecture {
        Architecture {
            frame_width: 16,
            frame_height: 12,
            input_pool: 2,
            conv_channels: vec![3, 4],
            feature_dim: 5,
            hidden_dim: 4,
            input_scale: 3.0,
            label_scale: 100.0,
        }
    }

    pub(crate) fn random_clip(arch: &Architecture, rng: &mut ChaCha8Rng) -> SelectedClip {
        let mut frames = vec![TactileFrame::filled(arch.frame_width, arch.frame_height, [0.0; 3])];
        for _ in 1..CLIP_LEN {
            let mut f = TactileFrame::filled(arch.frame_width, arch.frame_height, [0.0; 3]);
            f.data.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
            frames.push(f);
        }
        SelectedClip {
            frames,
            source_indices: [0, 1, 2, 3, 4],
            endpoint_index: 4,
        }
    }

    #[test]
    fn zero_weights_pass_the_bias_through() {
        let mut m = Model::zeros(tiny_arch()).unwrap();
        *m.head_bias_mut() = 0.4;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = m.forward_clip(&random_clip(&m.arch, &mut rng)).unwrap();
        for v in y {
            assert!((v - 40.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prediction_uses_last_three_and_clamps() {
        assert_eq!(predict_hardness(&[-7.0, 300.0, 30.0, 40.0, 50.0]).value(), 40.0);
        assert_eq!(predict_hardness(&[0.0, 0.0, 120.0, 120.0, 120.0]).value(), 100.0);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Model::init(tiny_arch(), 1.0, &mut rng).unwrap();
        let clip = random_clip(&m.arch, &mut rng);
        assert_eq!(m.forward_clip(&clip).unwrap(), m.forward_clip(&clip).unwrap());
    }

    #[test]
    fn batching_does_not_change_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Model::init(tiny_arch(), 1.0, &mut rng).unwrap();
        let a = random_clip(&m.arch, &mut rng);
        let b = random_clip(&m.arch, &mut rng);
        let (both, _) = m.forward_batch(&[&a, &b]).unwrap();
        let (single, _) = m.forward_batch(&[&b]).unwrap();
        for (x, y) in both[1].iter().zip(&single[0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_frame_size_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = Model::init(tiny_arch(), 1.0, &mut rng).unwrap();
        let mut other = tiny_arch();
        other.frame_width = 20;
        let clip = random_clip(&other, &mut rng);
        assert!(matches!(m.forward_clip(&clip), Err(NetError::Shape(_))));
    }

    #[test]
    fn model_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = Model::init(tiny_arch(), 1.0, &mut rng).unwrap();
        // Zero biases put the baseline frame's activations exactly on the
        // ReLU kink; check at a generic point instead.
        for p in &mut m.params {
            p.data.iter_mut().for_each(|v| *v += rng.gen_range(-0.1..0.1));
        }
        let clips = [random_clip(&m.arch, &mut rng), random_clip(&m.arch, &mut rng)];
        let refs: Vec<&SelectedClip> = clips.iter().collect();
        let targets = [0.3, 0.7];
        let loss = |m: &Model| {
            let (out, _) = m.forward_batch(&refs).unwrap();
            clip_loss(&out, &targets, 1.0).0
        };
        let (out, cache) = m.forward_batch(&refs).unwrap();
        let (_, dout) = clip_loss(&out, &targets, 1.0);
        let grads = m.backward(&cache, &dout).unwrap();
        let h = 1e-5;
        let (mut num, mut diff) = (0.0f64, 0.0f64);
        for p in 0..m.params.len() {
            for i in 0..m.params[p].len() {
                let orig = m.params[p].data[i];
                m.params[p].data[i] = orig + h;
                let up = loss(&m);
                m.params[p].data[i] = orig - h;
                let down = loss(&m);
                m.params[p].data[i] = orig;
                let fd = (up - down) / (2.0 * h);
                num += fd * fd;
                diff += (fd - grads[p].data[i]).powi(2);
            }
        }
        let rel = diff.sqrt() / num.sqrt();
        assert!(rel < 1e-4, "relative error {rel}");
    }
}
