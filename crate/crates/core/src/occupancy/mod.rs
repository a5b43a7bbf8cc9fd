//! Log-odds occupancy mapping, local cropping and top-view projection.

mod octree;
pub mod pgm;
mod topview;

pub use octree::{logit, probability, LogOddsParams, OccupancyOctree, VoxelKey};
pub use pgm::{frame_file_name, read_pgm, write_pgm};
pub use topview::{project_topview, GridSpec, TopViewImage};
