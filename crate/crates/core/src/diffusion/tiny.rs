//! A small permutation-equivariant noise predictor and its trainer.
//!
//! Per point `i`:
//!
//! ```text
//! h1_i  = silu(W1 x_i + b1)
//! g     = mean_i h1_i                       (pooled over the cloud)
//! h2_i  = silu(W2 [h1_i ; g ; emb(z)] + b2)
//! ε̂_i   = W3 h2_i + b3
//! ```
//!
//! The pooled feature is summed in sorted order per channel so that
//! permuting the input permutes the output bit-for-bit.
//! Gradients are derived by hand; see `loss_and_grad`.

use nalgebra::{Point3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::diffusion::process::forward_noise;
use crate::diffusion::{Denoiser, NoiseSchedule, ScheduleParams};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TinyArch {
    pub hidden: usize,
    /// Sinusoidal step-embedding width; must be even.
    pub embed: usize,
}

impl Default for TinyArch {
    fn default() -> Self {
        Self {
            hidden: 32,
            embed: 16,
        }
    }
}

impl TinyArch {
    fn w1(&self) -> usize {
        0
    }
    fn b1(&self) -> usize {
        self.hidden * 3
    }
    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }
    fn w2_cols(&self) -> usize {
        2 * self.hidden + self.embed
    }
    fn b2(&self) -> usize {
        self.w2() + self.hidden * self.w2_cols()
    }
    fn w3(&self) -> usize {
        self.b2() + self.hidden
    }
    fn b3(&self) -> usize {
        self.w3() + 3 * self.hidden
    }

    pub fn param_count(&self) -> usize {
        self.b3() + 3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyDenoiser {
    arch: TinyArch,
    params: Vec<f64>,
    label: String,
    schedule: ScheduleParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub arch: TinyArch,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Size of the fixed evaluation set used for the reported loss curve.
    pub eval_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: TinyArch::default(),
            learning_rate: 3e-3,
            batch_size: 8,
            epochs: 150,
            eval_samples: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    /// Evaluation loss before training, then after every epoch.
    pub eval: Vec<f64>,
    /// Mean minibatch loss per epoch.
    pub train: Vec<f64>,
}

impl LossCurve {
    pub fn initial(&self) -> f64 {
        self.eval[0]
    }

    pub fn last(&self) -> f64 {
        *self.eval.last().expect("curve has the initial entry")
    }
}

#[inline]
fn sigmoid(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

#[inline]
fn silu(a: f64) -> f64 {
    a * sigmoid(a)
}

#[inline]
fn silu_grad(a: f64) -> f64 {
    let s = sigmoid(a);
    s * (1.0 + a * (1.0 - s))
}

/// Forward activations kept for the backward pass.
struct Cache {
    a1: Vec<f64>,
    h1: Vec<f64>,
    pooled: Vec<f64>,
    emb: Vec<f64>,
    a2: Vec<f64>,
    h2: Vec<f64>,
    out: Vec<Vector3<f64>>,
}

impl TinyDenoiser {
    pub fn init(arch: TinyArch, label: impl Into<String>, schedule: ScheduleParams, rng: &mut impl Rng) -> Result<Self> {
        if arch.hidden == 0 || arch.embed == 0 || arch.embed % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "hidden must be > 0 and embed even and > 0, got {arch:?}"
            )));
        }
        let mut params = vec![0.0; arch.param_count()];
        let mut fill = |start: usize, len: usize, fan_in: usize, gain: f64| {
            let dist = Normal::new(0.0, gain / (fan_in as f64).sqrt()).expect("finite std");
            for v in &mut params[start..start + len] {
                *v = dist.sample(rng);
            }
        };
        fill(arch.w1(), arch.hidden * 3, 3, 1.0);
        fill(arch.w2(), arch.hidden * arch.w2_cols(), arch.w2_cols(), 1.0);
        fill(arch.w3(), 3 * arch.hidden, arch.hidden, 0.1);
        Ok(Self {
            arch,
            params,
            label: label.into(),
            schedule,
        })
    }

    pub fn from_parts(arch: TinyArch, params: Vec<f64>, label: String, schedule: ScheduleParams) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::InvalidInput(format!(
                "architecture needs {} parameters, got {}",
                arch.param_count(),
                params.len()
            )));
        }
        Ok(Self {
            arch,
            params,
            label,
            schedule,
        })
    }

    pub fn arch(&self) -> TinyArch {
        self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn schedule_params(&self) -> ScheduleParams {
        self.schedule
    }

    fn step_embedding(&self, z: usize) -> Vec<f64> {
        let half = self.arch.embed / 2;
        let mut emb = Vec::with_capacity(self.arch.embed);
        for k in 0..half {
            let freq = 1.0 / 10_000f64.powf(k as f64 / half as f64);
            emb.push((z as f64 * freq).sin());
        }
        for k in 0..half {
            let freq = 1.0 / 10_000f64.powf(k as f64 / half as f64);
            emb.push((z as f64 * freq).cos());
        }
        emb
    }

    fn forward(&self, points: &[Point3<f64>], z: usize) -> Cache {
        let h = self.arch.hidden;
        let n = points.len();
        let p = &self.params;
        let (w1, b1) = (&p[self.arch.w1()..], &p[self.arch.b1()..]);

        let mut a1 = vec![0.0; n * h];
        let mut h1 = vec![0.0; n * h];
        for (i, x) in points.iter().enumerate() {
            for j in 0..h {
                let a = w1[j * 3] * x.x + w1[j * 3 + 1] * x.y + w1[j * 3 + 2] * x.z + b1[j];
                a1[i * h + j] = a;
                h1[i * h + j] = silu(a);
            }
        }

        let mut pooled = vec![0.0; h];
        let mut column = Vec::with_capacity(n);
        for (j, g) in pooled.iter_mut().enumerate() {
            column.clear();
            column.extend((0..n).map(|i| h1[i * h + j]));
            column.sort_unstable_by(f64::total_cmp);
            *g = column.iter().sum::<f64>() / n as f64;
        }

        let emb = self.step_embedding(z);
        let cols = self.arch.w2_cols();
        let w2 = &p[self.arch.w2()..self.arch.b2()];
        let b2 = &p[self.arch.b2()..];
        // contribution shared by all points
        let shared: Vec<f64> = (0..h)
            .map(|j| {
                let row = &w2[j * cols..(j + 1) * cols];
                let mut s = b2[j];
                for k in 0..h {
                    s += row[h + k] * pooled[k];
                }
                for k in 0..self.arch.embed {
                    s += row[2 * h + k] * emb[k];
                }
                s
            })
            .collect();

        let w3 = &p[self.arch.w3()..self.arch.b3()];
        let b3 = &p[self.arch.b3()..];
        let mut a2 = vec![0.0; n * h];
        let mut h2 = vec![0.0; n * h];
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let hi = &h1[i * h..(i + 1) * h];
            for j in 0..h {
                let row = &w2[j * cols..j * cols + h];
                let mut s = shared[j];
                for k in 0..h {
                    s += row[k] * hi[k];
                }
                a2[i * h + j] = s;
                h2[i * h + j] = silu(s);
            }
            let h2i = &h2[i * h..(i + 1) * h];
            let mut o = [b3[0], b3[1], b3[2]];
            for (c, oc) in o.iter_mut().enumerate() {
                for k in 0..h {
                    *oc += w3[c * h + k] * h2i[k];
                }
            }
            out.push(Vector3::new(o[0], o[1], o[2]));
        }

        Cache {
            a1,
            h1,
            pooled,
            emb,
            a2,
            h2,
            out,
        }
    }

    /// Mean squared error against `target` over all coordinates, and its
    /// gradient accumulated (scaled by `weight`) into `grad`.
    pub fn loss_and_grad(
        &self,
        points: &[Point3<f64>],
        z: usize,
        target: &[Vector3<f64>],
        weight: f64,
        grad: &mut [f64],
    ) -> f64 {
        let arch = self.arch;
        let (h, cols, n) = (arch.hidden, arch.w2_cols(), points.len());
        let cache = self.forward(points, z);
        let p = &self.params;
        let w2 = &p[arch.w2()..arch.b2()];
        let w3 = &p[arch.w3()..arch.b3()];

        let denom = 3.0 * n as f64;
        let mut loss = 0.0;
        let mut d_shared = vec![0.0; h];
        let mut d_h1 = vec![0.0; n * h];
        let mut da2 = vec![0.0; h];
        for i in 0..n {
            let r = cache.out[i] - target[i];
            loss += r.norm_squared();
            let dout = r * (2.0 * weight / denom);
            let h2i = &cache.h2[i * h..(i + 1) * h];
            for c in 0..3 {
                grad[arch.b3() + c] += dout[c];
                for k in 0..h {
                    grad[arch.w3() + c * h + k] += dout[c] * h2i[k];
                }
            }
            for k in 0..h {
                let dh2 = w3[k] * dout[0] + w3[h + k] * dout[1] + w3[2 * h + k] * dout[2];
                da2[k] = dh2 * silu_grad(cache.a2[i * h + k]);
            }
            let h1i = &cache.h1[i * h..(i + 1) * h];
            let dh1i = &mut d_h1[i * h..(i + 1) * h];
            for j in 0..h {
                let d = da2[j];
                if d == 0.0 {
                    continue;
                }
                d_shared[j] += d;
                let row = &w2[j * cols..j * cols + h];
                let grow = &mut grad[arch.w2() + j * cols..arch.w2() + j * cols + h];
                for k in 0..h {
                    grow[k] += d * h1i[k];
                    dh1i[k] += d * row[k];
                }
            }
        }

        // shared term: b2, pooled and embedding columns of W2
        let mut d_pooled = vec![0.0; h];
        for j in 0..h {
            let d = d_shared[j];
            grad[arch.b2() + j] += d;
            let base = arch.w2() + j * cols;
            for k in 0..h {
                grad[base + h + k] += d * cache.pooled[k];
                d_pooled[k] += d * w2[j * cols + h + k];
            }
            for k in 0..arch.embed {
                grad[base + 2 * h + k] += d * cache.emb[k];
            }
        }

        for (i, x) in points.iter().enumerate() {
            for j in 0..h {
                let dh1 = d_h1[i * h + j] + d_pooled[j] / n as f64;
                let da1 = dh1 * silu_grad(cache.a1[i * h + j]);
                grad[arch.b1() + j] += da1;
                let g = &mut grad[arch.w1() + j * 3..arch.w1() + j * 3 + 3];
                g[0] += da1 * x.x;
                g[1] += da1 * x.y;
                g[2] += da1 * x.z;
            }
        }

        loss / denom
    }

    pub fn loss(&self, points: &[Point3<f64>], z: usize, target: &[Vector3<f64>]) -> f64 {
        let out = self.forward(points, z).out;
        out.iter()
            .zip(target)
            .map(|(o, t)| (o - t).norm_squared())
            .sum::<f64>()
            / (3.0 * points.len() as f64)
    }
}

impl Denoiser for TinyDenoiser {
    fn predict(
        &self,
        noisy: &PointCloud,
        label: &str,
        step: usize,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<Vector3<f64>>> {
        schedule.check_step(step)?;
        if label != self.label {
            return Err(Error::InvalidInput(format!(
                "denoiser trained on {:?}, asked for {label:?}",
                self.label
            )));
        }
        Ok(self.forward(noisy.points(), step).out)
    }

    fn name(&self) -> &'static str {
        "tiny"
    }
}

struct Sample {
    noisy: Vec<Point3<f64>>,
    z: usize,
    eps: Vec<Vector3<f64>>,
}

fn draw_sample(clean: &PointCloud, schedule: &NoiseSchedule, rng: &mut impl Rng) -> Result<Sample> {
    let z = rng.gen_range(1..=schedule.steps());
    let (noisy, eps) = forward_noise(clean, schedule, z, rng)?;
    Ok(Sample {
        noisy: noisy.into_points(),
        z,
        eps,
    })
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Denoising score matching on clean renders of `dataset`.
///
/// Each minibatch element is a dataset cloud noised at a uniformly drawn step
/// `z ∈ 1..=Z`; the loss is the mean squared error between predicted and true
/// noise. Parameters are updated with Adam. The reported curve uses a fixed
/// evaluation set drawn once up front.
pub fn train_tiny_denoiser(
    dataset: &[Scene],
    schedule: &NoiseSchedule,
    config: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<(TinyDenoiser, LossCurve)> {
    let Some(first) = dataset.first() else {
        return Err(Error::InvalidInput("training set is empty".into()));
    };
    let label = first.label().to_string();
    if let Some(s) = dataset.iter().find(|s| s.label() != label) {
        return Err(Error::InvalidInput(format!(
            "mixed labels in training set: {label:?} and {:?}",
            s.label()
        )));
    }
    if config.batch_size == 0 || config.epochs == 0 || config.eval_samples == 0 {
        return Err(Error::InvalidInput(
            "batch size, epochs and eval samples must be positive".into(),
        ));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::InvalidInput("learning rate must be positive".into()));
    }

    let clean: Vec<PointCloud> = dataset.iter().map(Scene::render).collect();
    let mut model = TinyDenoiser::init(config.arch, label, schedule.params(), rng)?;

    let mut eval_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let eval_set: Vec<Sample> = (0..config.eval_samples)
        .map(|k| draw_sample(&clean[k % clean.len()], schedule, &mut eval_rng))
        .collect::<Result<_>>()?;
    let eval_loss = |m: &TinyDenoiser| -> f64 {
        eval_set
            .iter()
            .map(|s| m.loss(&s.noisy, s.z, &s.eps))
            .sum::<f64>()
            / eval_set.len() as f64
    };

    let mut curve = LossCurve {
        eval: vec![eval_loss(&model)],
        train: Vec::with_capacity(config.epochs),
    };
    let mut adam = Adam::new(model.params.len());
    let mut grad = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..clean.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let w = 1.0 / chunk.len() as f64;
            let mut batch_loss = 0.0;
            for &k in chunk {
                let s = draw_sample(&clean[k], schedule, rng)?;
                batch_loss += w * model.loss_and_grad(&s.noisy, s.z, &s.eps, w, &mut grad);
            }
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingFailure {
                    epoch,
                    reason: format!("non-finite loss {batch_loss}"),
                    last_stable: Box::new(model),
                });
            }
            let before = model.params.clone();
            adam.step(&mut model.params, &grad, config.learning_rate);
            if model.params.iter().any(|p| !p.is_finite()) {
                model.params = before;
                return Err(Error::TrainingFailure {
                    epoch,
                    reason: "non-finite parameters after update".into(),
                    last_stable: Box::new(model),
                });
            }
            epoch_loss += batch_loss;
            batches += 1;
        }
        curve.train.push(epoch_loss / batches as f64);
        let e = eval_loss(&model);
        if !e.is_finite() {
            return Err(Error::TrainingFailure {
                epoch,
                reason: format!("non-finite evaluation loss {e}"),
                last_stable: Box::new(model),
            });
        }
        curve.eval.push(e);
        log::debug!("epoch {epoch}: train {:.5} eval {e:.5}", curve.train[epoch]);
    }
    Ok((model, curve))
}
