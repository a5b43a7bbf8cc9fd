//! Scene ingestion: KITTI scans, synthetic worlds, simulated LiDAR, trajectories
//! and viewpoint perturbation.

mod geometry;
pub mod kitti;
mod lidar;
mod perturb;
pub mod posefile;
mod trajectory;
mod world;

pub use geometry::{normalize_angle, Point3, PointCloud, Pose};
pub use kitti::{load_kitti_scan, load_kitti_scan_as, write_kitti_scan};
pub use lidar::{ray_box_entry, simulate_scan, simulate_scan_noisy, LidarSpec};
pub use perturb::{perturb_pose, perturb_sequence, PerturbSpec, PerturbTag};
pub use trajectory::{make_trajectory, square_loop, SENSOR_HEIGHT};
pub use world::{generate_world, Obstacle, Rect, World};
