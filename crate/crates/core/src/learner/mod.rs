//! Adversarial feature learning: the BiGAN baseline and the Stable-AFL
//! objective (Wasserstein joint critic, cycle reconstruction, side
//! discriminators), training and encoding.

mod augment;
pub mod check;
pub mod code;
mod losses;
mod model;
mod train;

pub use augment::rotate_image;
pub use code::{encode, encode_all, normalize_image, read_codes, write_codes, LatentCode};
pub use losses::{
    full_objective, generator_objective, loss_bigan_jsd, loss_cycle, loss_joint_wasserstein, loss_side_code, loss_side_data,
    reconstruction_error, Lambdas, Loss, LossPair, Objective, LOG_FLOOR,
};
pub use model::{image_batch, ArchConfig, BiGanModel, JointHead, ModelGrads, NETWORK_NAMES};
pub use train::{train, LossRecord, LossReport, TrainConfig, TrainMode, Trainer};
