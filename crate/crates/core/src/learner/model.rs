use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Gradients, LayerSpec, Network, Tensor};
use crate::Scalar;

/// Output head of the joint discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointHead {
    /// Unbounded Wasserstein critic.
    Critic,
    /// Sigmoid probability, for the plain BiGAN baseline.
    Probability,
}

impl JointHead {
    pub fn name(self) -> &'static str {
        match self {
            JointHead::Critic => "critic",
            JointHead::Probability => "probability",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "critic" => Ok(JointHead::Critic),
            "probability" => Ok(JointHead::Probability),
            _ => Err(Error::invalid(format!("unknown joint head {s:?}"))),
        }
    }
}

/// Layer sizes for the five networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    /// Square input side in pixels; must be divisible by 8.
    pub image_side: usize,
    pub code_dim: usize,
    /// Encoder conv channels; the decoder mirrors them.
    pub channels: [usize; 3],
    /// Hidden width of the three-layer discriminators.
    pub disc_hidden: usize,
    pub leaky_alpha: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            image_side: 64,
            code_dim: 64,
            channels: [16, 32, 64],
            disc_hidden: 256,
            leaky_alpha: 0.2,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_side == 0 || self.image_side % 8 != 0 {
            return Err(Error::invalid(format!("image side {} is not a positive multiple of 8", self.image_side)));
        }
        if self.code_dim == 0 || self.disc_hidden == 0 || self.channels.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.image_side * self.image_side
    }

    pub fn encoder_layers(&self) -> Vec<LayerSpec> {
        let [c1, c2, c3] = self.channels;
        let s = self.image_side / 8;
        let act = LayerSpec::LeakyRelu { alpha: self.leaky_alpha };
        let conv = |i, o| LayerSpec::Conv2d {
            in_channels: i,
            out_channels: o,
            kernel: 4,
            stride: 2,
        };
        vec![
            conv(1, c1),
            act.clone(),
            conv(c1, c2),
            act.clone(),
            conv(c2, c3),
            act,
            LayerSpec::Flatten,
            LayerSpec::Dense {
                fan_in: c3 * s * s,
                fan_out: self.code_dim,
            },
            LayerSpec::Tanh,
        ]
    }

    pub fn decoder_layers(&self) -> Vec<LayerSpec> {
        let [c1, c2, c3] = self.channels;
        let s = self.image_side / 8;
        let act = LayerSpec::LeakyRelu { alpha: self.leaky_alpha };
        let conv = |i, o| LayerSpec::Conv2d {
            in_channels: i,
            out_channels: o,
            kernel: 3,
            stride: 1,
        };
        let up = LayerSpec::Upsample { factor: 2 };
        vec![
            LayerSpec::Dense {
                fan_in: self.code_dim,
                fan_out: c3 * s * s,
            },
            act.clone(),
            LayerSpec::Reshape { shape: vec![c3, s, s] },
            up.clone(),
            conv(c3, c2),
            act.clone(),
            up.clone(),
            conv(c2, c1),
            act,
            up,
            conv(c1, 1),
            LayerSpec::Tanh,
        ]
    }

    /// Three dense layers on a flat input, with an optional sigmoid head.
    pub fn discriminator_layers(&self, input: usize, sigmoid: bool) -> Vec<LayerSpec> {
        let h = self.disc_hidden;
        let act = LayerSpec::LeakyRelu { alpha: self.leaky_alpha };
        let mut layers = vec![
            LayerSpec::Dense { fan_in: input, fan_out: h },
            act.clone(),
            LayerSpec::Dense { fan_in: h, fan_out: h },
            act,
            LayerSpec::Dense { fan_in: h, fan_out: 1 },
        ];
        if sigmoid {
            layers.push(LayerSpec::Sigmoid);
        }
        layers
    }
}

/// Encoder, decoder, joint discriminator and the two side discriminators.
#[derive(Debug, Clone, PartialEq)]
pub struct BiGanModel<T> {
    pub encoder: Network<T>,
    pub decoder: Network<T>,
    pub joint: Network<T>,
    pub data_disc: Network<T>,
    pub code_disc: Network<T>,
    pub code_dim: usize,
    pub image_side: usize,
    pub head: JointHead,
}

pub const NETWORK_NAMES: [&str; 5] = ["encoder", "decoder", "joint", "data_disc", "code_disc"];

impl<T: Scalar> BiGanModel<T> {
    pub fn new(arch: &ArchConfig, head: JointHead, seed: u64) -> Result<Self> {
        arch.validate()?;
        let side = arch.image_side;
        let img = [1, side, side];
        let n = arch.pixels();
        let sub = |k: u64| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k);
        let mut flat_img = vec![LayerSpec::Flatten];
        flat_img.extend(arch.discriminator_layers(n, true));
        Ok(Self {
            encoder: Network::new(&img, arch.encoder_layers(), sub(1))?,
            decoder: Network::new(&[arch.code_dim], arch.decoder_layers(), sub(2))?,
            joint: Network::new(&[n + arch.code_dim], arch.discriminator_layers(n + arch.code_dim, head == JointHead::Probability), sub(3))?,
            data_disc: Network::new(&img, flat_img, sub(4))?,
            code_disc: Network::new(&[arch.code_dim], arch.discriminator_layers(arch.code_dim, true), sub(5))?,
            code_dim: arch.code_dim,
            image_side: side,
            head,
        })
    }

    pub fn image_shape(&self, batch: usize) -> [usize; 4] {
        [batch, 1, self.image_side, self.image_side]
    }

    pub fn networks(&self) -> [&Network<T>; 5] {
        [&self.encoder, &self.decoder, &self.joint, &self.data_disc, &self.code_disc]
    }

    pub fn networks_mut(&mut self) -> [&mut Network<T>; 5] {
        [&mut self.encoder, &mut self.decoder, &mut self.joint, &mut self.data_disc, &mut self.code_disc]
    }

    pub fn param_count(&self) -> usize {
        self.networks().iter().map(|n| n.param_count()).sum()
    }

    /// Flat parameter `index` across all five networks, in [`NETWORK_NAMES`] order.
    pub fn param_mut(&mut self, mut index: usize) -> &mut T {
        for net in self.networks_mut() {
            let n = net.param_count();
            if index < n {
                return net.param_mut(index);
            }
            index -= n;
        }
        panic!("parameter index out of range");
    }

    pub fn to_checkpoint(&self, mut meta: Vec<(String, String)>) -> Checkpoint<T> {
        meta.push(("code_dim".into(), self.code_dim.to_string()));
        meta.push(("image_side".into(), self.image_side.to_string()));
        meta.push(("joint_head".into(), self.head.name().into()));
        Checkpoint {
            meta,
            networks: NETWORK_NAMES
                .iter()
                .zip(self.networks())
                .map(|(n, net)| (n.to_string(), net.clone()))
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint<T>) -> Result<Self> {
        let missing = |what: &str| Error::invalid(format!("checkpoint lacks {what}"));
        let net = |name: &str| ck.network(name).cloned().ok_or_else(|| missing(name));
        let num = |key: &str| -> Result<usize> {
            ck.meta(key)
                .ok_or_else(|| missing(key))?
                .parse()
                .map_err(|_| Error::invalid(format!("checkpoint field {key} is not an integer")))
        };
        let model = Self {
            encoder: net("encoder")?,
            decoder: net("decoder")?,
            joint: net("joint")?,
            data_disc: net("data_disc")?,
            code_disc: net("code_disc")?,
            code_dim: num("code_dim")?,
            image_side: num("image_side")?,
            head: JointHead::parse(ck.meta("joint_head").ok_or_else(|| missing("joint_head"))?)?,
        };
        if model.encoder.output_shape() != [model.code_dim] || model.decoder.input_shape() != [model.code_dim] {
            return Err(Error::invalid("checkpoint encoder/decoder disagree with code_dim"));
        }
        Ok(model)
    }
}

/// Parameter gradients for all five networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<T> {
    pub encoder: Gradients<T>,
    pub decoder: Gradients<T>,
    pub joint: Gradients<T>,
    pub data_disc: Gradients<T>,
    pub code_disc: Gradients<T>,
}

impl<T: Scalar> ModelGrads<T> {
    pub fn zeros_like(m: &BiGanModel<T>) -> Self {
        Self {
            encoder: Gradients::zeros_like(&m.encoder),
            decoder: Gradients::zeros_like(&m.decoder),
            joint: Gradients::zeros_like(&m.joint),
            data_disc: Gradients::zeros_like(&m.data_disc),
            code_disc: Gradients::zeros_like(&m.code_disc),
        }
    }

    pub fn add_scaled(&mut self, o: &Self, k: T) {
        self.encoder.add_scaled(&o.encoder, k);
        self.decoder.add_scaled(&o.decoder, k);
        self.joint.add_scaled(&o.joint, k);
        self.data_disc.add_scaled(&o.data_disc, k);
        self.code_disc.add_scaled(&o.code_disc, k);
    }

    /// Flattened in [`NETWORK_NAMES`] order, matching [`BiGanModel::param_mut`].
    pub fn flat(&self) -> Vec<T> {
        [&self.encoder, &self.decoder, &self.joint, &self.data_disc, &self.code_disc]
            .iter()
            .flat_map(|g| g.flat())
            .collect()
    }
}

/// Batch of normalized images `[B, 1, side, side]` from per-image pixel rows.
pub fn image_batch<T: Scalar>(side: usize, rows: &[&[T]]) -> Result<Tensor<T>> {
    let mut data = Vec::with_capacity(rows.len() * side * side);
    for r in rows {
        if r.len() != side * side {
            return Err(Error::ShapeMismatch {
                expected: vec![side * side],
                found: vec![r.len()],
            });
        }
        data.extend_from_slice(r);
    }
    Tensor::from_vec(&[rows.len(), 1, side, side], data)
}
