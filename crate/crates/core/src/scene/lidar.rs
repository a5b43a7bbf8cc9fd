//! Ray-casting LiDAR simulator over a box world.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Obstacle, Point3, PointCloud, Pose, World};

#[derive(Debug, Clone, PartialEq)]
pub struct LidarSpec {
    pub azimuth_count: usize,
    /// Ring elevations in radians; positive is up.
    pub elevation_angles: Vec<f64>,
    pub max_range: f64,
    /// Gaussian range jitter σ in meters. 0 disables noise.
    pub range_noise_sigma: f64,
}

impl Default for LidarSpec {
    fn default() -> Self {
        let rings = 8;
        Self {
            azimuth_count: 360,
            elevation_angles: (0..rings)
                .map(|i| -0.3 + 0.4 * i as f64 / (rings - 1) as f64)
                .collect(),
            max_range: 50.0,
            range_noise_sigma: 0.0,
        }
    }
}

impl LidarSpec {
    pub fn validate(&self) -> crate::Result<()> {
        if self.azimuth_count == 0 {
            return Err(crate::Error::invalid("azimuth_count must be >= 1"));
        }
        if !(self.max_range > 0.0) {
            return Err(crate::Error::invalid("max_range must be > 0"));
        }
        if !(self.range_noise_sigma >= 0.0) {
            return Err(crate::Error::invalid("range_noise_sigma must be >= 0"));
        }
        Ok(())
    }

    /// Unit beam direction in the sensor frame for (azimuth index, elevation).
    pub fn beam(&self, azimuth_index: usize, elevation: f64) -> Point3 {
        let az = 2.0 * PI * azimuth_index as f64 / self.azimuth_count as f64;
        let (se, ce) = elevation.sin_cos();
        let (sa, ca) = az.sin_cos();
        Point3::new(ce * ca, ce * sa, se)
    }
}

/// Entry distance of a ray into a box, if it enters ahead of the origin.
pub fn ray_box_entry(origin: &Point3, dir: &Point3, o: &Obstacle) -> Option<f64> {
    let f = &o.footprint;
    let lo = [f.min_x, f.min_y, 0.0];
    let hi = [f.max_x, f.max_y, o.height];
    let org = [origin.x, origin.y, origin.z];
    let d = [dir.x, dir.y, dir.z];
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for a in 0..3 {
        if d[a] == 0.0 {
            if org[a] < lo[a] || org[a] > hi[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[a];
        let (mut t0, mut t1) = ((lo[a] - org[a]) * inv, (hi[a] - org[a]) * inv);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    (t_near > 0.0).then_some(t_near)
}

fn nearest_hit(world: &World, origin: &Point3, dir: &Point3, max_range: f64) -> Option<f64> {
    world
        .obstacles
        .iter()
        .filter_map(|o| ray_box_entry(origin, dir, o))
        .filter(|&t| t <= max_range)
        .min_by(|a, b| a.total_cmp(b))
}

/// Noise-free scan; points are expressed in the sensor frame, ordered ring-major.
pub fn simulate_scan(world: &World, pose: &Pose, spec: &LidarSpec) -> PointCloud {
    cast(world, pose, spec, |t| t)
}

/// Scan with Gaussian range jitter of σ = `spec.range_noise_sigma`.
pub fn simulate_scan_noisy<R: Rng>(world: &World, pose: &Pose, spec: &LidarSpec, rng: &mut R) -> PointCloud {
    if spec.range_noise_sigma == 0.0 {
        return simulate_scan(world, pose, spec);
    }
    let normal = Normal::new(0.0, spec.range_noise_sigma).expect("finite sigma");
    cast(world, pose, spec, |t| (t + normal.sample(rng)).clamp(0.0, spec.max_range))
}

fn cast(world: &World, pose: &Pose, spec: &LidarSpec, mut range: impl FnMut(f64) -> f64) -> PointCloud {
    let origin = pose.position();
    let mut points = Vec::new();
    for &el in &spec.elevation_angles {
        for j in 0..spec.azimuth_count {
            let beam = spec.beam(j, el);
            let dir = pose.rotate(&beam);
            if let Some(t) = nearest_hit(world, &origin, &dir, spec.max_range) {
                let r = range(t);
                points.push(Point3::new(beam.x * r, beam.y * r, beam.z * r));
            }
        }
    }
    PointCloud::new(0, 0.0, points)
}
