//! Central finite-difference gradient checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LayerSpec, Network, Tensor};
use crate::error::Result;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Magnitudes below this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

/// Fraction of probed entries allowed to sit on a non-differentiable point.
pub const MAX_KINK_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Probe {
    /// Entries compared against the central difference.
    pub checked: usize,
    /// Entries whose ±eps interval straddles a kink (e.g. leaky-ReLU at 0).
    pub kinks: usize,
    pub max_rel_error: f64,
}

impl Probe {
    pub fn merge(self, o: Probe) -> Probe {
        Probe {
            checked: self.checked + o.checked,
            kinks: self.kinks + o.kinks,
            max_rel_error: self.max_rel_error.max(o.max_rel_error),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub probe: Probe,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        let p = self.probe;
        p.checked > 0 && p.max_rel_error < TOLERANCE && (p.kinks as f64) <= MAX_KINK_FRACTION * p.checked as f64
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Largest relative error between `analytic[i]` and the central difference of
/// `loss` when the scalar returned by `param(model, i)` is nudged by ±eps.
///
/// An entry whose central difference fails is set aside as a kink, rather
/// than scored, when a piecewise-linear breakpoint inside (x − eps, x + eps)
/// explains the miss: either `analytic` matches one one-sided slope far better
/// than the central estimate (for a smooth loss the one-sided slopes are the
/// worse estimates), or the central difference at eps/10 agrees. A wrong
/// gradient fails both tests at every step size.
pub fn max_relative_error<M>(
    model: &mut M,
    analytic: &[f64],
    indices: impl IntoIterator<Item = usize>,
    eps: f64,
    param: impl Fn(&mut M, usize) -> &mut f64,
    loss: impl Fn(&M) -> f64,
) -> Probe {
    let mut probe = Probe::default();
    let center = loss(model);
    for i in indices {
        let orig = *param(model, i);
        *param(model, i) = orig + eps;
        let up = loss(model);
        *param(model, i) = orig - eps;
        let down = loss(model);
        *param(model, i) = orig;
        let numeric = (up - down) / (2.0 * eps);
        let err = relative_error(analytic[i], numeric);
        if err >= TOLERANCE {
            let fwd = (up - center) / eps;
            let bwd = (center - down) / eps;
            let one_sided = relative_error(analytic[i], fwd).min(relative_error(analytic[i], bwd));
            let fine = eps / 10.0;
            *param(model, i) = orig + fine;
            let up = loss(model);
            *param(model, i) = orig - fine;
            let down = loss(model);
            *param(model, i) = orig;
            let refined = relative_error(analytic[i], (up - down) / (2.0 * fine));
            if one_sided < err / 4.0 || refined < TOLERANCE {
                probe.kinks += 1;
                continue;
            }
        }
        probe.max_rel_error = probe.max_rel_error.max(err);
        probe.checked += 1;
    }
    probe
}

/// Up to `limit` indices out of `0..len`, evenly spread and seeded.
pub fn sample_indices(len: usize, limit: usize, seed: u64) -> Vec<usize> {
    if len <= limit {
        return (0..len).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..limit).map(|_| rng.gen_range(0..len)).collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Check a network's parameter and input gradients under the scalar loss Σ y·r
/// for a fixed random projection r.
pub fn check_network(name: &str, net: &Network<f64>, input: &Tensor<f64>, seed: u64, limit: usize) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (out, tape) = net.forward(input)?;
    let r = Tensor::from_vec(out.shape(), (0..out.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let (dx, grads) = net.backward(&tape, &r)?;
    let project = |y: &Tensor<f64>| y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum::<f64>();

    let analytic = grads.flat();
    let mut probe = net.clone();
    let p = max_relative_error(
        &mut probe,
        &analytic,
        sample_indices(analytic.len(), limit, seed ^ 1),
        DEFAULT_EPS,
        |m, i| m.param_mut(i),
        |m| project(&m.predict(input).expect("shape checked")),
    );
    let mut x = input.clone();
    let q = max_relative_error(
        &mut x,
        dx.data(),
        sample_indices(input.len(), limit, seed ^ 2),
        DEFAULT_EPS,
        |t, i| &mut t.data_mut()[i],
        |t| project(&net.predict(t).expect("shape checked")),
    );
    Ok(GradCheck {
        name: name.to_string(),
        probe: p.merge(q),
    })
}

/// One small network per layer kind, each checked on a random batch of 3.
pub fn check_layer_kinds(seed: u64, limit: usize) -> Result<Vec<GradCheck>> {
    let conv = |in_channels, out_channels, kernel, stride| LayerSpec::Conv2d {
        in_channels,
        out_channels,
        kernel,
        stride,
    };
    let cases: Vec<(&str, Vec<usize>, Vec<LayerSpec>)> = vec![
        ("dense", vec![5], vec![LayerSpec::Dense { fan_in: 5, fan_out: 3 }]),
        ("conv2d", vec![2, 6, 5], vec![conv(2, 3, 4, 2)]),
        ("conv2d_stride1", vec![1, 5, 5], vec![conv(1, 2, 3, 1)]),
        ("conv2d_stride1_even", vec![2, 4, 5], vec![conv(2, 2, 4, 1)]),
        ("upsample", vec![2, 2, 3], vec![LayerSpec::Upsample { factor: 2 }]),
        ("leaky_relu", vec![7], vec![LayerSpec::LeakyRelu { alpha: 0.2 }]),
        ("tanh", vec![7], vec![LayerSpec::Tanh]),
        ("sigmoid", vec![7], vec![LayerSpec::Sigmoid]),
        ("flatten", vec![2, 3], vec![LayerSpec::Flatten]),
        ("reshape", vec![6], vec![LayerSpec::Reshape { shape: vec![2, 3] }]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cases
        .into_iter()
        .map(|(name, shape, layers)| {
            let net = Network::new(&shape, layers, rng.gen())?;
            let mut full = vec![3];
            full.extend(&shape);
            let n = full.iter().product();
            let x = Tensor::from_vec(&full, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
            check_network(name, &net, &x, rng.gen(), limit)
        })
        .collect()
}
