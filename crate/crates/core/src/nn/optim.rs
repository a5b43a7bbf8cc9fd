use super::{Gradients, Network, Tensor};
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    RmsProp { rho: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn rmsprop() -> Self {
        OptimizerKind::RmsProp { rho: 0.9, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    accum: Vec<Vec<Tensor<T>>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64, net: &Network<T>) -> Self {
        let accum = match kind {
            OptimizerKind::Sgd => Vec::new(),
            OptimizerKind::RmsProp { .. } => Gradients::zeros_like(net).layers,
        };
        Self {
            kind,
            learning_rate,
            accum,
        }
    }

    pub fn accumulators(&self) -> &[Vec<Tensor<T>>] {
        &self.accum
    }

    /// Apply one update. Rejects non-finite gradients before touching any weight.
    pub fn step(&mut self, net: &mut Network<T>, grads: &Gradients<T>) -> Result<()> {
        if grads.layers.len() != net.params.len() {
            return Err(Error::invalid("gradient table does not match network"));
        }
        for (i, (gs, ps)) in grads.layers.iter().zip(&net.params).enumerate() {
            if gs.len() != ps.len() {
                return Err(Error::invalid(format!("gradient count mismatch at layer {i}")));
            }
            for (g, p) in gs.iter().zip(ps) {
                g.expect_shape(p.shape())?;
                if !g.is_finite() {
                    return Err(Error::NonFinite {
                        context: "gradient".into(),
                        layer: i,
                    });
                }
            }
        }
        let lr = T::lit(self.learning_rate);
        match self.kind {
            OptimizerKind::Sgd => {
                for (gs, ps) in grads.layers.iter().zip(net.params.iter_mut()) {
                    for (g, p) in gs.iter().zip(ps.iter_mut()) {
                        p.add_scaled(g, -lr);
                    }
                }
            }
            OptimizerKind::RmsProp { rho, eps } => {
                let (rho, eps) = (T::lit(rho), T::lit(eps));
                for ((gs, ps), accs) in grads.layers.iter().zip(net.params.iter_mut()).zip(self.accum.iter_mut()) {
                    for ((g, p), a) in gs.iter().zip(ps.iter_mut()).zip(accs.iter_mut()) {
                        for ((w, &gv), av) in p.data_mut().iter_mut().zip(g.data()).zip(a.data_mut()) {
                            *av = rho * *av + (T::one() - rho) * gv * gv;
                            *w -= lr * gv / (*av + eps).sqrt();
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
