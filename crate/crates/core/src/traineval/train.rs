//! Minibatch training with endpoint-truncation augmentation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Config, OptimizerKind};
use crate::dataset::Dataset;
use crate::net::model::clip_loss;
use crate::net::{Architecture, Model, Tensor};
use crate::render::TactileFrame;
use crate::pipeline::{clip_at_endpoint, contact_threshold, select_clip, truncate_endpoints, SelectedClip};

use super::TrainError;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub iterations: usize,
    pub lr_step: usize,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub momentum: f64,
    /// Global gradient-norm limit; zero disables clipping.
    pub grad_clip: f64,
    pub huber_kappa: f64,
    pub forget_bias: f64,
    pub seed: u64,
    /// Contact threshold used for clip selection.
    pub tau: f64,
    /// Draw a random truncation endpoint for every sampled video.
    pub augment: bool,
    pub weight_decay: f64,
    pub max_shift_px: usize,
}

impl TrainOptions {
    pub fn from_config(cfg: &Config) -> Self {
        let t = &cfg.training;
        TrainOptions {
            optimizer: t.optimizer,
            learning_rate: t.learning_rate,
            iterations: t.iterations,
            lr_step: t.lr_step,
            lr_decay: t.lr_decay,
            batch_size: t.batch_size,
            momentum: t.momentum,
            grad_clip: t.grad_clip,
            huber_kappa: cfg.network.huber_kappa,
            forget_bias: cfg.network.forget_bias,
            seed: cfg.run.seed,
            tau: contact_threshold(&cfg.pipeline, cfg.render.noise_sigma),
            augment: true,
            weight_decay: t.weight_decay,
            max_shift_px: t.max_shift_px,
        }
    }

    pub fn learning_rate_at(&self, iteration: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi((iteration / self.lr_step.max(1)) as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Minibatch loss per iteration (normalised units).
    pub loss_curve: Vec<f64>,
    /// Training sequences that yielded a clip.
    pub used: usize,
    /// Ids of training sequences dropped for lack of a usable clip.
    pub rejected: Vec<String>,
}

enum Optimizer {
    Sgd { velocity: Vec<Tensor> },
    Adam { m: Vec<Tensor>, v: Vec<Tensor>, t: i32 },
}

impl Optimizer {
    fn new(kind: OptimizerKind, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(&p.shape)).collect();
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { velocity: zeros() },
            OptimizerKind::Adam => Optimizer::Adam {
                m: zeros(),
                v: zeros(),
                t: 0,
            },
        }
    }

    fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], lr: f64, momentum: f64, decay: f64) {
        if decay > 0.0 {
            let keep = 1.0 - lr * decay;
            params.iter_mut().flat_map(|p| p.data.iter_mut()).for_each(|w| *w *= keep);
        }
        match self {
            Optimizer::Sgd { velocity } => {
                for ((p, g), vel) in params.iter_mut().zip(grads).zip(velocity) {
                    for ((w, gi), vi) in p.data.iter_mut().zip(&g.data).zip(&mut vel.data) {
                        *vi = momentum * *vi + gi;
                        *w -= lr * *vi;
                    }
                }
            }
            Optimizer::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t);
                let c2 = 1.0 - ADAM_BETA2.powi(*t);
                for (((p, g), mt), vt) in params.iter_mut().zip(grads).zip(m).zip(v) {
                    for (((w, gi), mi), vi) in p.data.iter_mut().zip(&g.data).zip(&mut mt.data).zip(&mut vt.data) {
                        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
                        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
                        *w -= lr * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

fn clip_gradients(grads: &mut [Tensor], limit: f64) {
    if limit <= 0.0 {
        return;
    }
    let norm = grads
        .iter()
        .flat_map(|g| &g.data)
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > limit {
        let s = limit / norm;
        grads.iter_mut().flat_map(|g| g.data.iter_mut()).for_each(|v| *v *= s);
    }
}

/// Translates a baseline-subtracted frame; uncovered pixels read as "no change".
fn shifted(f: &TactileFrame, dx: i64, dy: i64) -> TactileFrame {
    let (w, h) = (f.width as i64, f.height as i64);
    let mut data = vec![0.0; f.data.len()];
    for y in 0..h {
        let sy = y - dy;
        if !(0..h).contains(&sy) {
            continue;
        }
        for x in 0..w {
            let sx = x - dx;
            if (0..w).contains(&sx) {
                let (d, s) = (3 * (y * w + x) as usize, 3 * (sy * w + sx) as usize);
                data[d..d + 3].copy_from_slice(&f.data[s..s + 3]);
            }
        }
    }
    TactileFrame {
        width: f.width,
        height: f.height,
        data,
    }
}

struct Example {
    index: usize,
    target: f64,
    /// Candidate clip endpoints; the full press is always among them.
    endpoints: Vec<usize>,
}

fn examples(ds: &Dataset, indices: &[usize], tau: f64) -> (Vec<Example>, Vec<String>) {
    let mut used = Vec::new();
    let mut rejected = Vec::new();
    for &i in indices {
        let (record, video) = (&ds.records[i], &ds.videos[i]);
        let Some(label) = record.label.value() else {
            rejected.push(record.id.clone());
            continue;
        };
        if select_clip(video, tau).is_err() {
            rejected.push(record.id.clone());
            continue;
        }
        let mut endpoints: Vec<usize> = truncate_endpoints(&video.intensity, tau)
            .into_iter()
            .map(|(_, e)| e)
            .filter(|&e| clip_at_endpoint(video, tau, e).is_ok())
            .collect();
        let full = video.len() - 1;
        if !endpoints.contains(&full) {
            endpoints.push(full);
        }
        used.push(Example {
            index: i,
            target: label,
            endpoints,
        });
    }
    (used, rejected)
}

/// Trains `model` in place on the given dataset rows.
pub fn train(model: &mut Model, ds: &Dataset, indices: &[usize], opts: &TrainOptions) -> Result<TrainReport, TrainError> {
    if indices.is_empty() {
        return Err(TrainError::EmptySplit("train".into()));
    }
    let (examples, rejected) = examples(ds, indices, opts.tau);
    if examples.is_empty() {
        return Err(TrainError::NoUsableSequences(indices.len()));
    }
    if !rejected.is_empty() {
        log::warn!("{} training sequences have no usable clip", rejected.len());
    }
    let scale = model.arch.label_scale;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x7a1e_0000_ba7c_4000);
    let mut optimizer = Optimizer::new(opts.optimizer, &model.params);
    let mut loss_curve = Vec::with_capacity(opts.iterations);
    for it in 0..opts.iterations {
        let mut clips: Vec<SelectedClip> = Vec::with_capacity(opts.batch_size);
        let mut targets = Vec::with_capacity(opts.batch_size);
        for _ in 0..opts.batch_size {
            let ex = &examples[rng.gen_range(0..examples.len())];
            let end = if opts.augment {
                ex.endpoints[rng.gen_range(0..ex.endpoints.len())]
            } else {
                *ex.endpoints.last().expect("full press is always present")
            };
            let mut clip = clip_at_endpoint(&ds.videos[ex.index], opts.tau, end)
                .expect("endpoints were checked when examples were built");
            if opts.max_shift_px > 0 {
                let m = opts.max_shift_px as i64;
                let (dx, dy) = (rng.gen_range(-m..=m), rng.gen_range(-m..=m));
                for f in &mut clip.frames {
                    *f = shifted(f, dx, dy);
                }
            }
            clips.push(clip);
            targets.push(ex.target / scale);
        }
        let refs: Vec<&SelectedClip> = clips.iter().collect();
        let (out, cache) = model.forward_batch(&refs)?;
        let (loss, dout) = clip_loss(&out, &targets, opts.huber_kappa);
        if !loss.is_finite() {
            return Err(TrainError::Diverged { iteration: it, loss });
        }
        let mut grads = model.backward(&cache, &dout)?;
        clip_gradients(&mut grads, opts.grad_clip);
        optimizer.step(&mut model.params, &grads, opts.learning_rate_at(it), opts.momentum, opts.weight_decay);
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(TrainError::Diverged {
                iteration: it,
                loss: f64::NAN,
            });
        }
        loss_curve.push(loss);
        if (it + 1) % 100 == 0 {
            let recent = &loss_curve[loss_curve.len().saturating_sub(100)..];
            log::info!(
                "iteration {}/{}: loss {:.5}",
                it + 1,
                opts.iterations,
                recent.iter().sum::<f64>() / recent.len() as f64
            );
        }
    }
    Ok(TrainReport {
        loss_curve,
        used: examples.len(),
        rejected,
    })
}

/// Initialises a model from the config and trains it.
pub fn train_from_scratch(cfg: &Config, ds: &Dataset, indices: &[usize]) -> Result<(Model, TrainReport), TrainError> {
    let opts = TrainOptions::from_config(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut model = Model::init(Architecture::from_config(cfg), opts.forget_bias, &mut rng)?;
    let report = train(&mut model, ds, indices, &opts)?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_in_memory, Label};

    fn tiny_setup() -> (Config, Dataset) {
        let mut cfg = Config::reference().clone();
        let d = &mut cfg.dataset;
        d.hardness_levels = 2;
        d.basic_human_per_level = 2;
        d.bad_contact_per_level = 0;
        d.complex_per_level = 0;
        d.robot_per_level = 0;
        d.complex_holdout_per_level = 0;
        d.simple_shape_per_level = 0;
        cfg.network.conv_channels = vec![4, 4];
        cfg.network.feature_dim = 8;
        cfg.network.hidden_dim = 8;
        cfg.training.batch_size = 2;
        cfg.training.iterations = 5;
        let ds = generate_in_memory(&cfg).unwrap();
        (cfg, ds)
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_untouched() {
        let (mut cfg, ds) = tiny_setup();
        cfg.training.learning_rate = 0.0;
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            cfg.training.optimizer = kind;
            let opts = TrainOptions::from_config(&cfg);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut model = Model::init(Architecture::from_config(&cfg), 1.0, &mut rng).unwrap();
            let before = model.clone();
            let all: Vec<usize> = (0..ds.len()).collect();
            train(&mut model, &ds, &all, &opts).unwrap();
            assert_eq!(model, before);
        }
    }

    #[test]
    fn fixed_seed_gives_identical_models() {
        let (cfg, ds) = tiny_setup();
        let all: Vec<usize> = (0..ds.len()).collect();
        let (a, ra) = train_from_scratch(&cfg, &ds, &all).unwrap();
        let (b, rb) = train_from_scratch(&cfg, &ds, &all).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(ra.loss_curve.len(), cfg.training.iterations);
    }

    #[test]
    fn unlabelled_only_training_set_is_rejected() {
        let (cfg, mut ds) = tiny_setup();
        ds.records.iter_mut().for_each(|r| r.label = Label::Unknown);
        let all: Vec<usize> = (0..ds.len()).collect();
        assert!(matches!(
            train_from_scratch(&cfg, &ds, &all),
            Err(TrainError::NoUsableSequences(4))
        ));
        assert!(matches!(train_from_scratch(&cfg, &ds, &[]), Err(TrainError::EmptySplit(_))));
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let (mut cfg, ds) = tiny_setup();
        cfg.training.optimizer = OptimizerKind::Sgd;
        cfg.training.learning_rate = 1e300;
        cfg.training.grad_clip = 0.0;
        let all: Vec<usize> = (0..ds.len()).collect();
        assert!(matches!(
            train_from_scratch(&cfg, &ds, &all),
            Err(TrainError::Diverged { .. })
        ));
    }

    #[test]
    fn step_schedule_decays_at_boundaries() {
        let mut opts = TrainOptions::from_config(Config::reference());
        opts.learning_rate = 1.0;
        opts.lr_step = 10;
        opts.lr_decay = 0.5;
        assert_eq!(opts.learning_rate_at(0), 1.0);
        assert_eq!(opts.learning_rate_at(9), 1.0);
        assert_eq!(opts.learning_rate_at(10), 0.5);
        assert_eq!(opts.learning_rate_at(25), 0.25);
    }

    #[test]
    fn gradient_clipping_bounds_the_norm() {
        let mut g = vec![Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap()];
        clip_gradients(&mut g, 1.0);
        assert!((g[0].data[0] - 0.6).abs() < 1e-12 && (g[0].data[1] - 0.8).abs() < 1e-12);
        clip_gradients(&mut g, 10.0);
        assert!((g[0].data[1] - 0.8).abs() < 1e-12);
    }
}
