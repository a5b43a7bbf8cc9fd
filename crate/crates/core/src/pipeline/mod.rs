//! End-to-end pipeline: dataset directories, maps, features, matching and evaluation.

pub mod config;
pub mod dataset;
pub mod run;
mod stages;

pub use config::{Paths, PipelineConfig};
pub use dataset::{generate_dataset, ingest_kitti, read_dataset, write_dataset, Dataset, SyntheticSpec};
pub use stages::{
    build_maps, evaluate, ground_truth, learned_features, match_features, roc_inputs, sad_features, view_poses, Evaluation,
    FeatureKind, MapSpec, MatchOutput, SAD_DOWN,
};
