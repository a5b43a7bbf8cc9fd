//! The five adversarial/reconstruction losses with exact parameter gradients.
//!
//! Every loss is a batch mean. Log arguments are floored at [`LOG_FLOOR`];
//! where the floor is active the gradient is zero.

use super::model::{BiGanModel, ModelGrads};
use crate::error::Result;
use crate::nn::{Gradients, Network, Tape, Tensor};
use crate::Scalar;

pub const LOG_FLOOR: f64 = 1e-12;

/// A scalar loss and its gradient w.r.t. every parameter of the model.
#[derive(Debug, Clone)]
pub struct Loss<T> {
    pub value: T,
    pub grads: ModelGrads<T>,
}

/// Discriminator-side and generator-side losses from one forward pass.
#[derive(Debug, Clone)]
pub struct LossPair<T> {
    pub disc: Loss<T>,
    pub gen: Loss<T>,
}

/// Weights of the auxiliary terms in the generator objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lambdas {
    pub x: f64,
    pub z: f64,
    pub cyc: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Self { x: 1.0, z: 1.0, cyc: 1.0 }
    }
}

/// −mean ln p and its gradient w.r.t. p.
fn mean_neg_log<T: Scalar>(p: &Tensor<T>) -> (T, Tensor<T>) {
    mean_neg_log_of(p, |v| v, T::one())
}

/// −mean ln(1 − p) and its gradient w.r.t. p.
fn mean_neg_log1m<T: Scalar>(p: &Tensor<T>) -> (T, Tensor<T>) {
    mean_neg_log_of(p, |v| T::one() - v, -T::one())
}

fn mean_neg_log_of<T: Scalar>(p: &Tensor<T>, arg: impl Fn(T) -> T, darg: T) -> (T, Tensor<T>) {
    let n = T::of_usize(p.len());
    let floor = T::lit(LOG_FLOOR);
    let mut value = T::zero();
    let mut grad = Tensor::zeros(p.shape());
    for (g, &v) in grad.data_mut().iter_mut().zip(p.data()) {
        let a = arg(v);
        if a > floor {
            value -= a.ln();
            *g = -darg / (a * n);
        } else {
            value -= floor.ln();
        }
    }
    (value / n, grad)
}

fn mean<T: Scalar>(t: &Tensor<T>) -> T {
    t.sum() / T::of_usize(t.len())
}

fn split_joint<T: Scalar>(model: &BiGanModel<T>, din: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let b = din.batch();
    din.split_features(model.image_side * model.image_side, &model.image_shape(b), &[b, model.code_dim])
}

fn joint_forward<T: Scalar>(model: &BiGanModel<T>, x: &Tensor<T>, z: &Tensor<T>) -> Result<(Tensor<T>, Tape<T>)> {
    model.joint.forward(&Tensor::concat_features(x, z)?)
}

/// Forward state shared by the joint-discriminator losses.
struct JointPass<T> {
    tape_e: Tape<T>,
    tape_d: Tape<T>,
    real: Tensor<T>,
    tape_r: Tape<T>,
    fake: Tensor<T>,
    tape_f: Tape<T>,
}

fn joint_pass<T: Scalar>(model: &BiGanModel<T>, x: &Tensor<T>, z: &Tensor<T>) -> Result<JointPass<T>> {
    let (ex, tape_e) = model.encoder.forward(x)?;
    let (dz, tape_d) = model.decoder.forward(z)?;
    let (real, tape_r) = joint_forward(model, x, &ex)?;
    let (fake, tape_f) = joint_forward(model, &dz, z)?;
    Ok(JointPass {
        tape_e,
        tape_d,
        real,
        tape_r,
        fake,
        tape_f,
    })
}

/// Backpropagate output gradients on D_J(x, En x) and D_J(De z, z) into D_J, En and De.
fn joint_grads<T: Scalar>(model: &BiGanModel<T>, p: &JointPass<T>, g_real: &Tensor<T>, g_fake: &Tensor<T>) -> Result<ModelGrads<T>> {
    let mut grads = ModelGrads::zeros_like(model);
    let (din_r, g_jr) = model.joint.backward(&p.tape_r, g_real)?;
    let (din_f, g_jf) = model.joint.backward(&p.tape_f, g_fake)?;
    let (_, dex) = split_joint(model, &din_r)?;
    let (ddz, _) = split_joint(model, &din_f)?;
    grads.joint = g_jr;
    grads.joint.add_scaled(&g_jf, T::one());
    grads.encoder = model.encoder.backward(&p.tape_e, &dex)?.1;
    grads.decoder = model.decoder.backward(&p.tape_d, &ddz)?.1;
    Ok(grads)
}

/// Plain BiGAN value function with a probability-headed joint discriminator.
///
/// disc = −mean ln D(x, En x) − mean ln(1 − D(De z, z));
/// gen (non-saturating, labels swapped) = −mean ln D(De z, z) − mean ln(1 − D(x, En x)).
pub fn loss_bigan_jsd<T: Scalar>(model: &BiGanModel<T>, x: &Tensor<T>, z: &Tensor<T>) -> Result<LossPair<T>> {
    let p = joint_pass(model, x, z)?;
    let (a, ga) = mean_neg_log(&p.real);
    let (b, gb) = mean_neg_log1m(&p.fake);
    let disc = Loss {
        value: a + b,
        grads: joint_grads(model, &p, &ga, &gb)?,
    };
    let (a, ga) = mean_neg_log(&p.fake);
    let (b, gb) = mean_neg_log1m(&p.real);
    let gen = Loss {
        value: a + b,
        grads: joint_grads(model, &p, &gb, &ga)?,
    };
    Ok(LossPair { disc, gen })
}

/// Wasserstein joint loss. The critic estimate is
/// mean D_J(x, En x) − mean D_J(De z, z); the critic minimizes its negation
/// and the encoder/decoder minimize the estimate itself.
pub fn loss_joint_wasserstein<T: Scalar>(model: &BiGanModel<T>, x: &Tensor<T>, z: &Tensor<T>) -> Result<LossPair<T>> {
    let p = joint_pass(model, x, z)?;
    let estimate = mean(&p.real) - mean(&p.fake);
    let br = T::of_usize(p.real.len());
    let bf = T::of_usize(p.fake.len());
    let g_real = Tensor::filled(p.real.shape(), -T::one() / br);
    let g_fake = Tensor::filled(p.fake.shape(), T::one() / bf);
    let critic = joint_grads(model, &p, &g_real, &g_fake)?;
    let mut gen = ModelGrads::zeros_like(model);
    gen.add_scaled(&critic, -T::one());
    Ok(LossPair {
        disc: Loss { value: -estimate, grads: critic },
        gen: Loss { value: estimate, grads: gen },
    })
}

/// mean ‖x − y‖² over the batch rows, and its gradient w.r.t. `y`.
fn mean_sq_dist<T: Scalar>(y: &Tensor<T>, x: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    let b = T::of_usize(x.batch());
    let diff = y.zip_map(x, |a, c| a - c)?;
    let value = diff.data().iter().map(|&d| d * d).sum::<T>() / b;
    let two = T::lit(2.0);
    Ok((value, diff.map(|d| two * d / b)))
}

/// mean ‖De(En x) − x‖² + mean ‖En(De z) − z‖².
pub fn loss_cycle<T: Scalar>(model: &BiGanModel<T>, x: &Tensor<T>, z: &Tensor<T>) -> Result<Loss<T>> {
    let mut grads = ModelGrads::zeros_like(model);
    let (ex, tape_e) = model.encoder.forward(x)?;
    let (xr, tape_d2) = model.decoder.forward(&ex)?;
    let (data, g_xr) = mean_sq_dist(&xr, x)?;
    let (dex, g_d) = model.decoder.backward(&tape_d2, &g_xr)?;
    let (_, g_e) = model.encoder.backward(&tape_e, &dex)?;
    grads.decoder.add_scaled(&g_d, T::one());
    grads.encoder.add_scaled(&g_e, T::one());

    let (dz, tape_d) = model.decoder.forward(z)?;
    let (zr, tape_e2) = model.encoder.forward(&dz)?;
    let (code, g_zr) = mean_sq_dist(&zr, z)?;
    let (ddz, g_e) = model.encoder.backward(&tape_e2, &g_zr)?;
    let (_, g_d) = model.decoder.backward(&tape_d, &ddz)?;
    grads.encoder.add_scaled(&g_e, T::one());
    grads.decoder.add_scaled(&g_d, T::one());
    Ok(Loss { value: data + code, grads })
}

/// mean ‖De(En x) − x‖², the data half of the cycle loss.
pub fn reconstruction_error<T: Scalar>(model: &BiGanModel<T>, x: &Tensor<T>) -> Result<T> {
    let xr = model.decoder.predict(&model.encoder.predict(x)?)?;
    Ok(mean_sq_dist(&xr, x)?.0)
}

/// JSD GAN loss of a side discriminator `disc` on `real` vs `fake`, plus the
/// non-saturating generator term −mean ln disc(fake). Returns
/// (disc value, disc param grads on the disc loss, gen value, disc param grads
/// on the gen term, d disc-loss/d fake, d gen/d fake).
#[allow(clippy::type_complexity)]
fn side_terms<T: Scalar>(
    disc: &Network<T>,
    real: &Tensor<T>,
    fake: &Tensor<T>,
) -> Result<(T, Gradients<T>, T, Gradients<T>, Tensor<T>, Tensor<T>)> {
    let (pr, tape_r) = disc.forward(real)?;
    let (pf, tape_f) = disc.forward(fake)?;
    let (a, ga) = mean_neg_log(&pr);
    let (b, gb) = mean_neg_log1m(&pf);
    let (_, mut gd) = disc.backward(&tape_r, &ga)?;
    let (dfake_d, gdf) = disc.backward(&tape_f, &gb)?;
    gd.add_scaled(&gdf, T::one());
    let (g, gg) = mean_neg_log(&pf);
    let (dfake_g, gdg) = disc.backward(&tape_f, &gg)?;
    Ok((a + b, gd, g, gdg, dfake_d, dfake_g))
}

/// Side data loss: D_X separates data x from De(z).
pub fn loss_side_data<T: Scalar>(model: &BiGanModel<T>, x: &Tensor<T>, z: &Tensor<T>) -> Result<LossPair<T>> {
    let (dz, tape_d) = model.decoder.forward(z)?;
    let (dv, gdisc, gv, ggen, dfake_d, dfake_g) = side_terms(&model.data_disc, x, &dz)?;
    let mut disc = ModelGrads::zeros_like(model);
    disc.data_disc = gdisc;
    disc.decoder = model.decoder.backward(&tape_d, &dfake_d)?.1;
    let mut gen = ModelGrads::zeros_like(model);
    gen.data_disc = ggen;
    gen.decoder = model.decoder.backward(&tape_d, &dfake_g)?.1;
    Ok(LossPair {
        disc: Loss { value: dv, grads: disc },
        gen: Loss { value: gv, grads: gen },
    })
}

/// Side code loss: D_Z separates prior samples z from En(x).
pub fn loss_side_code<T: Scalar>(model: &BiGanModel<T>, x: &Tensor<T>, z: &Tensor<T>) -> Result<LossPair<T>> {
    let (ex, tape_e) = model.encoder.forward(x)?;
    let (dv, gdisc, gv, ggen, dfake_d, dfake_g) = side_terms(&model.code_disc, z, &ex)?;
    let mut disc = ModelGrads::zeros_like(model);
    disc.code_disc = gdisc;
    disc.encoder = model.encoder.backward(&tape_e, &dfake_d)?.1;
    let mut gen = ModelGrads::zeros_like(model);
    gen.code_disc = ggen;
    gen.encoder = model.encoder.backward(&tape_e, &dfake_g)?.1;
    Ok(LossPair {
        disc: Loss { value: dv, grads: disc },
        gen: Loss { value: gv, grads: gen },
    })
}

/// Terms of the full value function on one batch, each in value-function form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective<T> {
    /// mean D_J(x, En x) − mean D_J(De z, z).
    pub l_j: T,
    /// mean ln D_X(x) + mean ln(1 − D_X(De z)).
    pub l_x: T,
    /// mean ln D_Z(z) + mean ln(1 − D_Z(En x)).
    pub l_z: T,
    pub l_cyc: T,
    /// l_j + λ_X·l_x + λ_Z·l_z + λ_cyc·l_cyc.
    pub total: T,
}

pub fn full_objective<T: Scalar>(model: &BiGanModel<T>, x: &Tensor<T>, z: &Tensor<T>, lambdas: Lambdas) -> Result<Objective<T>> {
    let l_j = loss_joint_wasserstein(model, x, z)?.gen.value;
    let l_x = -loss_side_data(model, x, z)?.disc.value;
    let l_z = -loss_side_code(model, x, z)?.disc.value;
    let l_cyc = loss_cycle(model, x, z)?.value;
    let total = l_j + T::lit(lambdas.x) * l_x + T::lit(lambdas.z) * l_z + T::lit(lambdas.cyc) * l_cyc;
    Ok(Objective { l_j, l_x, l_z, l_cyc, total })
}

/// Encoder/decoder objective of one Stable-AFL generator update:
/// gen_W + λ_X·gen_X + λ_Z·gen_Z + λ_cyc·L_cyc, sharing forward passes.
/// Only encoder and decoder gradients are filled in. Also returns L_cyc.
pub fn generator_objective<T: Scalar>(model: &BiGanModel<T>, x: &Tensor<T>, z: &Tensor<T>, lambdas: Lambdas) -> Result<(Loss<T>, T)> {
    let (lx, lz, lc) = (T::lit(lambdas.x), T::lit(lambdas.z), T::lit(lambdas.cyc));
    let (ex, tape_e) = model.encoder.forward(x)?;
    let (dz, tape_d) = model.decoder.forward(z)?;

    let (real, tape_r) = joint_forward(model, x, &ex)?;
    let (fake, tape_f) = joint_forward(model, &dz, z)?;
    let gen_w = mean(&real) - mean(&fake);
    let g_real = Tensor::filled(real.shape(), T::one() / T::of_usize(real.len()));
    let g_fake = Tensor::filled(fake.shape(), -T::one() / T::of_usize(fake.len()));
    let (_, mut dex) = split_joint(model, &model.joint.backward(&tape_r, &g_real)?.0)?;
    let (mut ddz, _) = split_joint(model, &model.joint.backward(&tape_f, &g_fake)?.0)?;

    let (pfx, tape_x) = model.data_disc.forward(&dz)?;
    let (gen_x, g) = mean_neg_log(&pfx);
    ddz.add_scaled(&model.data_disc.backward(&tape_x, &g)?.0, lx);

    let (pfz, tape_z) = model.code_disc.forward(&ex)?;
    let (gen_z, g) = mean_neg_log(&pfz);
    dex.add_scaled(&model.code_disc.backward(&tape_z, &g)?.0, lz);

    let mut grads = ModelGrads::zeros_like(model);
    let (xr, tape_d2) = model.decoder.forward(&ex)?;
    let (cyc_x, g_xr) = mean_sq_dist(&xr, x)?;
    let (d, g_d) = model.decoder.backward(&tape_d2, &g_xr)?;
    dex.add_scaled(&d, lc);
    grads.decoder.add_scaled(&g_d, lc);

    let (zr, tape_e2) = model.encoder.forward(&dz)?;
    let (cyc_z, g_zr) = mean_sq_dist(&zr, z)?;
    let (d, g_e) = model.encoder.backward(&tape_e2, &g_zr)?;
    ddz.add_scaled(&d, lc);
    grads.encoder.add_scaled(&g_e, lc);

    grads.encoder.add_scaled(&model.encoder.backward(&tape_e, &dex)?.1, T::one());
    grads.decoder.add_scaled(&model.decoder.backward(&tape_d, &ddz)?.1, T::one());
    let l_cyc = cyc_x + cyc_z;
    Ok((
        Loss {
            value: gen_w + lx * gen_x + lz * gen_z + lc * l_cyc,
            grads,
        },
        l_cyc,
    ))
}

/// Critic update on frozen encoder/decoder: returns the critic estimate and
/// the joint-network gradient of its negation.
pub(crate) fn critic_step<T: Scalar>(model: &BiGanModel<T>, x: &Tensor<T>, z: &Tensor<T>) -> Result<(T, Gradients<T>)> {
    let ex = model.encoder.predict(x)?;
    let dz = model.decoder.predict(z)?;
    let (real, tape_r) = joint_forward(model, x, &ex)?;
    let (fake, tape_f) = joint_forward(model, &dz, z)?;
    let g_real = Tensor::filled(real.shape(), -T::one() / T::of_usize(real.len()));
    let g_fake = Tensor::filled(fake.shape(), T::one() / T::of_usize(fake.len()));
    let (_, mut g) = model.joint.backward(&tape_r, &g_real)?;
    g.add_scaled(&model.joint.backward(&tape_f, &g_fake)?.1, T::one());
    Ok((mean(&real) - mean(&fake), g))
}

/// Side discriminator update on frozen encoder/decoder: (loss, disc grads).
pub(crate) fn side_step<T: Scalar>(disc: &Network<T>, real: &Tensor<T>, fake: &Tensor<T>) -> Result<(T, Gradients<T>)> {
    let (pr, tape_r) = disc.forward(real)?;
    let (pf, tape_f) = disc.forward(fake)?;
    let (a, ga) = mean_neg_log(&pr);
    let (b, gb) = mean_neg_log1m(&pf);
    let (_, mut g) = disc.backward(&tape_r, &ga)?;
    g.add_scaled(&disc.backward(&tape_f, &gb)?.1, T::one());
    Ok((a + b, g))
}
