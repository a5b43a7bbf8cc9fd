use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::{self, LayerSpec, Saved};
use super::Tensor;
use crate::error::{Error, Result};
use crate::Scalar;

/// Per-layer parameter gradients, shaped like [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Vec<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Self {
            layers: net
                .params
                .iter()
                .map(|ps| ps.iter().map(|p| Tensor::zeros(p.shape())).collect())
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Self, k: T) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (ta, tb) in a.iter_mut().zip(b) {
                ta.add_scaled(tb, k);
            }
        }
    }

    pub fn scaled(mut self, k: T) -> Self {
        for t in self.layers.iter_mut().flatten() {
            t.data_mut().iter_mut().for_each(|v| *v *= k);
        }
        self
    }

    pub fn flat(&self) -> Vec<T> {
        self.layers.iter().flatten().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn max_abs(&self) -> T {
        self.layers
            .iter()
            .flatten()
            .flat_map(|t| t.data().iter())
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Intermediate values recorded by [`Network::forward`].
#[derive(Debug, Clone)]
pub struct Tape<T> {
    batch: usize,
    saved: Vec<Saved<T>>,
}

impl<T> Tape<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Feed-forward stack of layers with owned parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    /// Per layer: `[weight, bias]` for dense/conv layers, empty otherwise.
    pub params: Vec<Vec<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
    seed: u64,
}

impl<T: Scalar> Network<T> {
    /// Build and initialize uniformly in ±√(6/(fan_in+fan_out)); biases start at 0.
    pub fn new(input_shape: &[usize], layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let shapes = Self::shape_chain(input_shape, &layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = layers
            .iter()
            .map(|l| {
                let shapes = l.param_shapes();
                if shapes.is_empty() {
                    return Vec::new();
                }
                let (fi, fo) = l.fans();
                let bound = (6.0 / (fi + fo) as f64).sqrt();
                let n: usize = shapes[0].iter().product();
                let w: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-bound..=bound))).collect();
                vec![
                    Tensor::from_vec(&shapes[0], w).expect("shape"),
                    Tensor::zeros(&shapes[1]),
                ]
            })
            .collect();
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
            params,
            shapes,
            seed,
        })
    }

    /// Assemble from explicit parameters (e.g. a checkpoint).
    pub fn from_parts(input_shape: &[usize], layers: Vec<LayerSpec>, params: Vec<Vec<Tensor<T>>>, seed: u64) -> Result<Self> {
        let shapes = Self::shape_chain(input_shape, &layers)?;
        if params.len() != layers.len() {
            return Err(Error::invalid("parameter table does not match layer count"));
        }
        for (l, ps) in layers.iter().zip(&params) {
            let want = l.param_shapes();
            if want.len() != ps.len() {
                return Err(Error::invalid(format!("{} layer has wrong parameter count", l.name())));
            }
            for (w, p) in want.iter().zip(ps) {
                p.expect_shape(w)?;
            }
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
            params,
            shapes,
            seed,
        })
    }

    fn shape_chain(input_shape: &[usize], layers: &[LayerSpec]) -> Result<Vec<Vec<usize>>> {
        let mut shapes = vec![input_shape.to_vec()];
        for l in layers {
            let next = l.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().flatten().map(Tensor::len).sum()
    }

    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut T)) {
        for t in self.params.iter_mut().flatten() {
            t.data_mut().iter_mut().for_each(&mut f);
        }
    }

    pub fn params_flat(&self) -> Vec<T> {
        self.params.iter().flatten().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// Mutable access to the i-th scalar parameter in flat order.
    pub fn param_mut(&mut self, mut index: usize) -> &mut T {
        for t in self.params.iter_mut().flatten() {
            if index < t.len() {
                return &mut t.data_mut()[index];
            }
            index -= t.len();
        }
        panic!("parameter index out of range");
    }

    /// Run a batch `[B, ..input_shape]` through the stack.
    pub fn forward(&self, input: &Tensor<T>) -> Result<(Tensor<T>, Tape<T>)> {
        if input.shape().len() != self.input_shape.len() + 1 || input.shape()[1..] != self.input_shape[..] {
            let mut expected = vec![input.batch()];
            expected.extend_from_slice(&self.input_shape);
            return Err(Error::ShapeMismatch {
                expected,
                found: input.shape().to_vec(),
            });
        }
        let mut x = input.clone();
        let mut saved = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let (y, s) = layer::forward(l, &self.params[i], x, &self.shapes[i + 1])?;
            saved.push(s);
            x = y;
        }
        Ok((
            x,
            Tape {
                batch: input.batch(),
                saved,
            },
        ))
    }

    /// Forward pass without keeping a tape.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward(input).map(|(y, _)| y)
    }

    /// Reverse pass: gradient of Σ output·output_grad w.r.t. input and parameters.
    pub fn backward(&self, tape: &Tape<T>, output_grad: &Tensor<T>) -> Result<(Tensor<T>, Gradients<T>)> {
        let mut expected = vec![tape.batch];
        expected.extend_from_slice(self.output_shape());
        output_grad.expect_shape(&expected)?;
        if tape.saved.len() != self.layers.len() {
            return Err(Error::invalid("tape was recorded by a different network"));
        }
        let mut g = output_grad.clone();
        let mut grads: Vec<Vec<Tensor<T>>> = vec![Vec::new(); self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            let (dx, dp) = layer::backward(&self.layers[i], &self.params[i], &tape.saved[i], &self.shapes[i], g)?;
            grads[i] = dp;
            g = dx;
        }
        Ok((g, Gradients { layers: grads }))
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            input_shape: self.input_shape.clone(),
            layers: self.layers.clone(),
            params: self.params.iter().map(|ps| ps.iter().map(Tensor::cast).collect()).collect(),
            shapes: self.shapes.clone(),
            seed: self.seed,
        }
    }
}

/// Clamp every parameter into [−c, c].
pub fn clip_params<T: Scalar>(net: &mut Network<T>, c: T) {
    assert!(c > T::zero(), "clip bound must be positive");
    net.for_each_param_mut(|w| *w = w.max(-c).min(c));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense(fan_in: usize, fan_out: usize) -> LayerSpec {
        LayerSpec::Dense { fan_in, fan_out }
    }

    #[test]
    fn identity_network() {
        let net = Network::<f64>::new(&[3], vec![], 0).unwrap();
        let x = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(net.predict(&x).unwrap(), x);
    }

    #[test]
    fn zero_dense_gives_zero() {
        let mut net = Network::<f64>::new(&[3], vec![dense(3, 2)], 1).unwrap();
        net.for_each_param_mut(|w| *w = 0.0);
        let x = Tensor::from_vec(&[1, 3], vec![1.0, -2.0, 3.0]).unwrap();
        assert_eq!(net.predict(&x).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn hand_dense() {
        let mut net = Network::<f64>::new(&[2], vec![dense(2, 2)], 1).unwrap();
        net.params[0][0] = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        net.params[0][1] = Tensor::zeros(&[2]);
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 1.0]).unwrap();
        assert_eq!(net.predict(&x).unwrap().data(), &[3.0, 7.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let net = Network::<f64>::new(&[2], vec![dense(2, 2)], 1).unwrap();
        let x = Tensor::from_vec(&[1, 3], vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(net.predict(&x), Err(Error::ShapeMismatch { .. })));
        assert!(Network::<f64>::new(&[2], vec![dense(3, 2)], 1).is_err());
        let (_, tape) = net.forward(&Tensor::zeros(&[1, 2])).unwrap();
        assert!(net.backward(&tape, &Tensor::zeros(&[1, 3])).is_err());
    }

    #[test]
    fn linear_param_grads_are_outer_products() {
        let net = Network::<f64>::new(&[3], vec![dense(3, 2)], 5).unwrap();
        let x = Tensor::from_vec(&[1, 3], vec![0.5, -1.5, 2.0]).unwrap();
        let (_, tape) = net.forward(&x).unwrap();
        let e1 = Tensor::from_vec(&[1, 2], vec![0.0, 1.0]).unwrap();
        let (dx, grads) = net.backward(&tape, &e1).unwrap();
        assert_eq!(grads.layers[0][0].data(), &[0.0, 0.0, 0.0, 0.5, -1.5, 2.0]);
        assert_eq!(grads.layers[0][1].data(), &[0.0, 1.0]);
        assert_eq!(dx.data(), &net.params[0][0].data()[3..6]);
    }

    #[test]
    fn tanh_derivative_at_zero() {
        let net = Network::<f64>::new(&[1], vec![LayerSpec::Tanh], 0).unwrap();
        let (_, tape) = net.forward(&Tensor::zeros(&[1, 1])).unwrap();
        let (dx, _) = net.backward(&tape, &Tensor::filled(&[1, 1], 1.0)).unwrap();
        assert_eq!(dx.data(), &[1.0]);
    }

    #[test]
    fn clipping() {
        let mut net = Network::<f64>::new(&[1], vec![dense(1, 2)], 0).unwrap();
        net.params[0][0] = Tensor::from_vec(&[2, 1], vec![0.5, 0.005]).unwrap();
        clip_params(&mut net, 0.01);
        assert_eq!(net.params[0][0].data(), &[0.01, 0.005]);
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let layers = vec![dense(4, 8), LayerSpec::Tanh, dense(8, 1)];
        let a = Network::<f64>::new(&[4], layers.clone(), 9).unwrap();
        let b = Network::<f64>::new(&[4], layers.clone(), 9).unwrap();
        assert_eq!(a, b);
        let bound = (6.0f64 / 12.0).sqrt();
        assert!(a.params[0][0].data().iter().all(|w| w.abs() <= bound));
        assert_ne!(a, Network::<f64>::new(&[4], layers, 10).unwrap());
    }

    #[test]
    fn forward_is_referentially_transparent() {
        let layers = vec![
            LayerSpec::Conv2d { in_channels: 1, out_channels: 3, kernel: 3, stride: 2 },
            LayerSpec::LeakyRelu { alpha: 0.2 },
            LayerSpec::Flatten,
            dense(3 * 4 * 4, 2),
        ];
        let net = Network::<f64>::new(&[1, 8, 8], layers, 2).unwrap();
        let x = Tensor::from_vec(&[2, 1, 8, 8], (0..128).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let a = net.predict(&x).unwrap();
        let b = net.predict(&x).unwrap();
        assert_eq!(a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn clip_is_idempotent(seed in 0u64..1000, c in 0.001f64..0.5) {
            let mut net = Network::<f64>::new(&[5], vec![dense(5, 7), dense(7, 3)], seed).unwrap();
            clip_params(&mut net, c);
            let once = net.clone();
            clip_params(&mut net, c);
            prop_assert_eq!(&net, &once);
            prop_assert!(net.params_flat().iter().all(|w| w.abs() <= c));
        }
    }
}
