pub mod divergence;
pub mod error;
pub mod evaluation;
pub mod learner;
pub mod matcher;
pub mod nn;
pub mod occupancy;
pub mod pipeline;
pub mod scalar;
pub mod scene;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision instantiations of the generic types.
pub type Tensor = nn::Tensor<f64>;
pub type Network = nn::Network<f64>;
pub type Model = learner::BiGanModel<f64>;
pub type Code = learner::LatentCode<f64>;
pub type Matrix = matcher::DifferenceMatrix<f64>;
pub type Match = matcher::MatchResult<f64>;
