//! Finite-difference checks of every learner loss on small random models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::losses::{generator_objective, loss_bigan_jsd, loss_cycle, loss_joint_wasserstein, loss_side_code, loss_side_data, Lambdas, Loss};
use super::model::{ArchConfig, BiGanModel, JointHead};
use crate::error::Result;
use crate::nn::gradcheck::{max_relative_error, sample_indices, GradCheck, DEFAULT_EPS};
use crate::nn::Tensor;

/// 8×8 images, 3-dim codes, 2 channels per conv, 5 hidden discriminator units.
pub fn micro_arch() -> ArchConfig {
    ArchConfig {
        image_side: 8,
        code_dim: 3,
        channels: [2, 2, 2],
        disc_hidden: 5,
        leaky_alpha: 0.2,
    }
}

pub fn micro_batch(arch: &ArchConfig, batch: usize, seed: u64) -> (Tensor<f64>, Tensor<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = arch.image_side;
    let x = (0..batch * n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let z = (0..batch * arch.code_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (
        Tensor::from_vec(&[batch, 1, n, n], x).unwrap(),
        Tensor::from_vec(&[batch, arch.code_dim], z).unwrap(),
    )
}

fn check_loss(
    name: &str,
    model: &BiGanModel<f64>,
    seed: u64,
    limit: usize,
    f: impl Fn(&BiGanModel<f64>) -> Result<Loss<f64>>,
) -> Result<GradCheck> {
    let analytic = f(model)?.grads.flat();
    let mut probe = model.clone();
    let idx = sample_indices(analytic.len(), limit, seed);
    let probe = max_relative_error(
        &mut probe,
        &analytic,
        idx,
        DEFAULT_EPS,
        |m, i| m.param_mut(i),
        |m| f(m).map(|l| l.value).unwrap_or(f64::NAN),
    );
    Ok(GradCheck {
        name: name.to_string(),
        probe,
    })
}

/// Checks both sides of each loss plus the combined generator objective,
/// against central differences over up to `limit` sampled parameters each.
pub fn check_losses(seed: u64, limit: usize) -> Result<Vec<GradCheck>> {
    let arch = micro_arch();
    let (x, z) = micro_batch(&arch, 4, seed);
    let critic = BiGanModel::<f64>::new(&arch, JointHead::Critic, seed)?;
    let prob = BiGanModel::<f64>::new(&arch, JointHead::Probability, seed)?;
    let l = Lambdas { x: 0.7, z: 1.3, cyc: 0.5 };
    let mut out = Vec::new();
    out.push(check_loss("bigan_jsd/disc", &prob, seed, limit, |m| Ok(loss_bigan_jsd(m, &x, &z)?.disc))?);
    out.push(check_loss("bigan_jsd/gen", &prob, seed, limit, |m| Ok(loss_bigan_jsd(m, &x, &z)?.gen))?);
    out.push(check_loss("joint_wasserstein/critic", &critic, seed, limit, |m| Ok(loss_joint_wasserstein(m, &x, &z)?.disc))?);
    out.push(check_loss("joint_wasserstein/gen", &critic, seed, limit, |m| Ok(loss_joint_wasserstein(m, &x, &z)?.gen))?);
    out.push(check_loss("cycle", &critic, seed, limit, |m| loss_cycle(m, &x, &z))?);
    out.push(check_loss("side_data/disc", &critic, seed, limit, |m| Ok(loss_side_data(m, &x, &z)?.disc))?);
    out.push(check_loss("side_data/gen", &critic, seed, limit, |m| Ok(loss_side_data(m, &x, &z)?.gen))?);
    out.push(check_loss("side_code/disc", &critic, seed, limit, |m| Ok(loss_side_code(m, &x, &z)?.disc))?);
    out.push(check_loss("side_code/gen", &critic, seed, limit, |m| Ok(loss_side_code(m, &x, &z)?.gen))?);
    // the combined objective only reports encoder/decoder gradients
    let enc_dec = critic.encoder.param_count() + critic.decoder.param_count();
    let gen = |m: &BiGanModel<f64>| Ok(generator_objective(m, &x, &z, l)?.0);
    let analytic = gen(&critic)?.grads.flat();
    let mut probe = critic.clone();
    let probe = max_relative_error(
        &mut probe,
        &analytic,
        sample_indices(enc_dec, limit, seed),
        DEFAULT_EPS,
        |m, i| m.param_mut(i),
        |m| gen(m).map(|l| l.value).unwrap_or(f64::NAN),
    );
    out.push(GradCheck {
        name: "generator_objective".into(),
        probe,
    });
    Ok(out)
}

