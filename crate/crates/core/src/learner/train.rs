use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::augment::rotate_image;
use super::losses::{critic_step, generator_objective, loss_bigan_jsd, side_step, Lambdas};
use super::model::{image_batch, BiGanModel, JointHead};
use crate::error::{Error, Result};
use crate::nn::{clip_params, Gradients, Network, OptimizerKind, OptimizerState, Tensor};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Wasserstein joint critic with clipping, side discriminators and cycle loss.
    StableAfl,
    /// Plain BiGAN value function with a probability-headed joint discriminator.
    Baseline,
}

impl TrainMode {
    pub fn head(self) -> JointHead {
        match self {
            TrainMode::StableAfl => JointHead::Critic,
            TrainMode::Baseline => JointHead::Probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub batch_size: usize,
    pub iterations: usize,
    /// Critic updates per generator update (Stable-AFL only).
    pub n_critic: usize,
    pub clip_c: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub lambdas: Lambdas,
    /// Full width b of the uniform rotation augmentation, radians; 0 disables it.
    pub rotation_augment: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::StableAfl,
            batch_size: 16,
            iterations: 1000,
            n_critic: 5,
            clip_c: 0.01,
            learning_rate: 5e-5,
            optimizer: OptimizerKind::rmsprop(),
            lambdas: Lambdas::default(),
            rotation_augment: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.n_critic == 0 {
            return Err(Error::invalid("batch_size and n_critic must be >= 1"));
        }
        if !(self.clip_c > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::invalid("clip_c and learning rate must be > 0"));
        }
        let l = self.lambdas;
        if [l.x, l.z, l.cyc].iter().any(|v| !(*v >= 0.0)) || !(self.rotation_augment >= 0.0) {
            return Err(Error::invalid("loss weights and rotation width must be >= 0"));
        }
        Ok(())
    }
}

/// One row of the loss report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iter: usize,
    /// Joint loss minimized by the discriminator side.
    pub l_j: f64,
    pub l_x: f64,
    pub l_z: f64,
    pub l_cyc: f64,
    /// Stable-AFL: mean D_J(real) − mean D_J(fake). Baseline: the implied
    /// Jensen–Shannon estimate ln 2 − l_j/2.
    pub critic_estimate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossReport {
    pub records: Vec<LossRecord>,
}

impl LossReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,L_J,L_X,L_Z,L_cyc,critic_estimate\n");
        for r in &self.records {
            writeln!(out, "{},{},{},{},{},{}", r.iter, r.l_j, r.l_x, r.l_z, r.l_cyc, r.critic_estimate).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Stepwise trainer over a fixed set of normalized images.
pub struct Trainer<'a, T: Scalar> {
    pub model: BiGanModel<T>,
    data: &'a [Vec<T>],
    cfg: TrainConfig,
    rng: ChaCha8Rng,
    opt: [OptimizerState<T>; 5],
    iteration: usize,
    pub report: LossReport,
}

impl<'a, T: Scalar> Trainer<'a, T> {
    pub fn new(model: BiGanModel<T>, data: &'a [Vec<T>], cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if model.head != cfg.mode.head() {
            return Err(Error::invalid(format!(
                "{:?} training needs a {} joint head",
                cfg.mode,
                cfg.mode.head().name()
            )));
        }
        if data.len() < cfg.batch_size {
            return Err(Error::invalid(format!("{} images for batch size {}", data.len(), cfg.batch_size)));
        }
        let px = model.image_side * model.image_side;
        if let Some(bad) = data.iter().find(|d| d.len() != px) {
            return Err(Error::ShapeMismatch {
                expected: vec![px],
                found: vec![bad.len()],
            });
        }
        let opt = model
            .networks()
            .map(|n| OptimizerState::new(cfg.optimizer, cfg.learning_rate, n));
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            model,
            data,
            cfg,
            opt,
            iteration: 0,
            report: LossReport::default(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn model(&self) -> &BiGanModel<T> {
        &self.model
    }

    fn image_batch(&mut self) -> Result<Tensor<T>> {
        let side = self.model.image_side;
        let width = self.cfg.rotation_augment;
        let rows: Vec<Vec<T>> = (0..self.cfg.batch_size)
            .map(|_| {
                let img = &self.data[self.rng.gen_range(0..self.data.len())];
                if width > 0.0 {
                    let angle = self.rng.gen_range(-width / 2.0..width / 2.0);
                    rotate_image(img, side, angle, -T::one())
                } else {
                    img.clone()
                }
            })
            .collect();
        let refs: Vec<&[T]> = rows.iter().map(Vec::as_slice).collect();
        image_batch(side, &refs)
    }

    fn code_batch(&mut self) -> Tensor<T> {
        let (b, d) = (self.cfg.batch_size, self.model.code_dim);
        let data = (0..b * d).map(|_| T::lit(self.rng.gen_range(-1.0..=1.0))).collect();
        Tensor::from_vec(&[b, d], data).expect("prior batch shape")
    }

    fn apply(&mut self, which: usize, grads: &Gradients<T>) -> Result<()> {
        let it = self.iteration;
        let net: &mut Network<T> = self.model.networks_mut().into_iter().nth(which).unwrap();
        self.opt[which].step(net, grads).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFiniteLoss { iteration: it },
            e => e,
        })
    }

    fn check(&self, values: &[T]) -> Result<()> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteLoss { iteration: self.iteration })
        }
    }

    /// One training iteration.
    pub fn step(&mut self) -> Result<LossRecord> {
        self.step_observed(|_| {})
    }

    /// One iteration; `after_critic` sees the joint network after every critic update.
    pub fn step_observed(&mut self, mut after_critic: impl FnMut(&Network<T>)) -> Result<LossRecord> {
        let rec = match self.cfg.mode {
            TrainMode::StableAfl => {
                let mut estimate = T::zero();
                for _ in 0..self.cfg.n_critic {
                    let (x, z) = (self.image_batch()?, self.code_batch());
                    let (est, g) = critic_step(&self.model, &x, &z)?;
                    self.check(&[est])?;
                    self.apply(2, &g)?;
                    clip_params(&mut self.model.joint, T::lit(self.cfg.clip_c));
                    after_critic(&self.model.joint);
                    estimate = est;
                }
                let (x, z) = (self.image_batch()?, self.code_batch());
                let fake_x = self.model.decoder.predict(&z)?;
                let (l_x, g) = side_step(&self.model.data_disc, &x, &fake_x)?;
                self.apply(3, &g)?;
                let fake_z = self.model.encoder.predict(&x)?;
                let (l_z, g) = side_step(&self.model.code_disc, &z, &fake_z)?;
                self.apply(4, &g)?;
                let (gen, l_cyc) = generator_objective(&self.model, &x, &z, self.cfg.lambdas)?;
                self.check(&[l_x, l_z, gen.value, l_cyc])?;
                self.apply(0, &gen.grads.encoder)?;
                self.apply(1, &gen.grads.decoder)?;
                LossRecord {
                    iter: self.iteration,
                    l_j: -estimate.as_f64(),
                    l_x: l_x.as_f64(),
                    l_z: l_z.as_f64(),
                    l_cyc: l_cyc.as_f64(),
                    critic_estimate: estimate.as_f64(),
                }
            }
            TrainMode::Baseline => {
                let (x, z) = (self.image_batch()?, self.code_batch());
                let disc = loss_bigan_jsd(&self.model, &x, &z)?.disc;
                self.check(&[disc.value])?;
                self.apply(2, &disc.grads.joint)?;
                after_critic(&self.model.joint);
                let (x, z) = (self.image_batch()?, self.code_batch());
                let gen = loss_bigan_jsd(&self.model, &x, &z)?.gen;
                self.check(&[gen.value])?;
                self.apply(0, &gen.grads.encoder)?;
                self.apply(1, &gen.grads.decoder)?;
                let l_j = disc.value.as_f64();
                LossRecord {
                    iter: self.iteration,
                    l_j,
                    l_x: 0.0,
                    l_z: 0.0,
                    l_cyc: 0.0,
                    critic_estimate: std::f64::consts::LN_2 - l_j / 2.0,
                }
            }
        };
        self.report.records.push(rec);
        self.iteration += 1;
        Ok(rec)
    }

    pub fn run(&mut self, iterations: usize) -> Result<()> {
        for _ in 0..iterations {
            self.step()?;
        }
        Ok(())
    }

    pub fn finish(self) -> (BiGanModel<T>, LossReport) {
        (self.model, self.report)
    }
}

/// Run `cfg.iterations` iterations from `model` on normalized images.
pub fn train<T: Scalar>(model: BiGanModel<T>, images: &[Vec<T>], cfg: &TrainConfig) -> Result<(BiGanModel<T>, LossReport)> {
    let mut t = Trainer::new(model, images, cfg.clone())?;
    t.run(cfg.iterations)?;
    Ok(t.finish())
}
