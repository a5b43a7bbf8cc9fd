//! Dataset directories: poses, scans and a small metadata file.
//!
//! ```text
//! <dir>/dataset.ini        [dataset] frames, reference_frames, source
//! <dir>/poses.txt          frame_id x y z roll pitch yaw
//! <dir>/velodyne/NNNNNN.bin
//! <dir>/world.ini          synthetic worlds only
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ini::Ini;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scene::posefile::{read_poses, write_poses};
use crate::scene::{
    generate_world, load_kitti_scan_as, make_trajectory, simulate_scan_noisy, square_loop, write_kitti_scan, LidarSpec,
    PointCloud, Pose, Rect, World,
};

pub const META_FILE: &str = "dataset.ini";
pub const POSES_FILE: &str = "poses.txt";
pub const SCANS_DIR: &str = "velodyne";
pub const WORLD_FILE: &str = "world.ini";

/// Synthetic square-loop world.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub world_side: f64,
    pub obstacles: usize,
    pub loop_side: f64,
    pub laps: usize,
    pub step: f64,
    /// Obstacles closer than this to the loop are removed.
    pub clearance: f64,
    pub lidar: LidarSpec,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            world_side: 100.0,
            obstacles: 60,
            loop_side: 60.0,
            laps: 2,
            step: 2.4,
            clearance: 3.0,
            lidar: LidarSpec::default(),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.world_side > 0.0 && self.loop_side > 0.0 && self.loop_side < self.world_side) {
            return Err(Error::invalid("loop side must lie in (0, world side)"));
        }
        if self.laps == 0 {
            return Err(Error::invalid("laps must be >= 1"));
        }
        if !(self.step > 0.0) || !(self.clearance >= 0.0) {
            return Err(Error::invalid("step must be > 0 and clearance >= 0"));
        }
        self.lidar.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub world: Option<World>,
    pub poses: Vec<(u32, Pose)>,
    pub scans: Vec<PointCloud>,
    /// Frames before this index form the reference sequence, the rest the test sequence.
    pub reference_frames: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.scans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scans.is_empty()
    }

    /// Pose of every scan, in scan order.
    pub fn scan_poses(&self) -> Result<Vec<Pose>> {
        self.scans
            .iter()
            .map(|s| {
                self.poses
                    .iter()
                    .find(|(id, _)| *id == s.frame_id)
                    .map(|(_, p)| *p)
                    .ok_or_else(|| Error::DataIntegrity(format!("no pose for frame {}", s.frame_id)))
            })
            .collect()
    }
}

/// Build the world, drive `laps` laps around the square and scan at every pose.
/// The first lap is the reference sequence.
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let bounds = Rect::square(spec.world_side);
    let margin = (spec.world_side - spec.loop_side) / 2.0;
    let waypoints = square_loop(bounds.min_x + margin, bounds.min_y + margin, spec.loop_side, spec.laps);
    let mut world = generate_world(spec.seed, spec.obstacles, bounds)?;
    world.clear_corridor(&waypoints, spec.clearance);
    let poses = make_trajectory(&world, &waypoints, spec.step)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5ca9);
    let scans: Vec<PointCloud> = poses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut c = simulate_scan_noisy(&world, p, &spec.lidar, &mut rng);
            c.frame_id = i as u32;
            c.timestamp = i as f64 * 0.1;
            c
        })
        .collect();
    let lap = (4.0 * spec.loop_side / spec.step + 1e-9).floor() as usize;
    Ok(Dataset {
        world: Some(world),
        poses: poses.into_iter().enumerate().map(|(i, p)| (i as u32, p)).collect(),
        reference_frames: lap.min(scans.len()),
        scans,
    })
}

pub fn scan_file(dir: &Path, frame_id: u32) -> PathBuf {
    dir.join(SCANS_DIR).join(format!("{frame_id:06}.bin"))
}

pub fn write_dataset(ds: &Dataset, dir: impl AsRef<Path>, source: &str) -> Result<()> {
    let dir = dir.as_ref();
    let scans = dir.join(SCANS_DIR);
    fs::create_dir_all(&scans).map_err(|e| Error::io(&scans, e))?;
    for s in &ds.scans {
        write_kitti_scan(scan_file(dir, s.frame_id), s)?;
    }
    write_poses(dir.join(POSES_FILE), &ds.poses)?;
    if let Some(w) = &ds.world {
        w.save(dir.join(WORLD_FILE))?;
    }
    let mut meta = Ini::new();
    meta.with_section(Some("dataset"))
        .set("source", source)
        .set("frames", ds.scans.len().to_string())
        .set("reference_frames", ds.reference_frames.to_string());
    let path = dir.join(META_FILE);
    meta.write_to_file(&path).map_err(|e| Error::io(&path, e))
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact(path))
    }
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let meta_path = require(dir.join(META_FILE))?;
    let meta = Ini::load_from_file(&meta_path).map_err(|e| Error::malformed(&meta_path, e.to_string()))?;
    let field = |key: &str| -> Result<usize> {
        meta.get_from(Some("dataset"), key)
            .ok_or_else(|| Error::malformed(&meta_path, format!("missing dataset.{key}")))?
            .trim()
            .parse()
            .map_err(|_| Error::malformed(&meta_path, format!("dataset.{key} is not a count")))
    };
    let (frames, reference_frames) = (field("frames")?, field("reference_frames")?);
    let poses = read_poses(require(dir.join(POSES_FILE))?)?;
    let world_path = dir.join(WORLD_FILE);
    let world = if world_path.exists() { Some(World::load(&world_path)?) } else { None };
    let mut scans = Vec::with_capacity(frames);
    for i in 0..frames {
        let id = i as u32;
        scans.push(load_kitti_scan_as(require(scan_file(dir, id))?, id, i as f64 * 0.1)?);
    }
    Ok(Dataset {
        world,
        poses,
        scans,
        reference_frames: reference_frames.min(frames),
    })
}

/// Copy a directory of KITTI `.bin` scans (sorted by name) and a pose file
/// into dataset layout. Scans are renumbered 0..n in name order; pose line
/// `i` belongs to scan `i`.
pub fn ingest_kitti(scan_dir: impl AsRef<Path>, pose_file: impl AsRef<Path>, reference_frames: Option<usize>) -> Result<Dataset> {
    let scan_dir = scan_dir.as_ref();
    let mut names: Vec<PathBuf> = fs::read_dir(scan_dir)
        .map_err(|e| Error::io(scan_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    names.sort();
    let pose_file = pose_file.as_ref();
    let mut poses = read_poses(pose_file)?;
    if poses.len() < names.len() {
        return Err(Error::DataIntegrity(format!(
            "{} has {} poses for {} scans",
            pose_file.display(),
            poses.len(),
            names.len()
        )));
    }
    poses.truncate(names.len());
    let scans = names
        .iter()
        .enumerate()
        .map(|(i, p)| load_kitti_scan_as(p, i as u32, i as f64 * 0.1))
        .collect::<Result<Vec<_>>>()?;
    let poses = poses.into_iter().enumerate().map(|(i, (_, p))| (i as u32, p)).collect();
    let n = scans.len();
    Ok(Dataset {
        world: None,
        poses,
        scans,
        reference_frames: reference_frames.unwrap_or(n / 2).min(n),
    })
}
