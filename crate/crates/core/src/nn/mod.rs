//! Dense tensors, layer stacks with reverse-mode gradients, optimizers and
//! checkpoints.

pub mod checkpoint;
pub mod gradcheck;
mod layer;
mod network;
mod optim;
mod tensor;

pub use checkpoint::Checkpoint;
pub use layer::LayerSpec;
pub use network::{clip_params, Gradients, Network, Tape};
pub use optim::{OptimizerKind, OptimizerState};
pub use tensor::Tensor;
