//! Log-odds occupancy voxels at leaf resolution.
//!
//! Leaves are stored sparsely by integer key; the key range is bounded by
//! `max_depth` exactly as an octree of that depth centered at the origin would be.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::{Point3, PointCloud, Pose};

pub type VoxelKey = [i32; 3];

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn probability(log_odds: f64) -> f64 {
    1.0 / (1.0 + (-log_odds).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogOddsParams {
    pub l_hit: f64,
    pub l_miss: f64,
    pub clamp_min: f64,
    pub clamp_max: f64,
    /// Disable to accumulate unbounded sums.
    pub clamping: bool,
}

impl Default for LogOddsParams {
    fn default() -> Self {
        Self {
            l_hit: logit(0.7),
            l_miss: logit(0.4),
            clamp_min: logit(0.12),
            clamp_max: logit(0.97),
            clamping: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyOctree {
    pub resolution: f64,
    pub max_depth: u32,
    pub params: LogOddsParams,
    leaves: HashMap<VoxelKey, f64>,
}

impl Default for OccupancyOctree {
    fn default() -> Self {
        Self::new(0.25, 16)
    }
}

impl OccupancyOctree {
    pub fn new(resolution: f64, max_depth: u32) -> Self {
        Self::with_params(resolution, max_depth, LogOddsParams::default())
    }

    pub fn with_params(resolution: f64, max_depth: u32, params: LogOddsParams) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        assert!((1..=31).contains(&max_depth), "max_depth must be in 1..=31");
        Self {
            resolution,
            max_depth,
            params,
            leaves: HashMap::new(),
        }
    }

    fn half_extent(&self) -> i64 {
        1i64 << (self.max_depth - 1)
    }

    pub fn key_of(&self, p: &Point3) -> Option<VoxelKey> {
        let half = self.half_extent();
        let mut key = [0i32; 3];
        for (k, v) in key.iter_mut().zip([p.x, p.y, p.z]) {
            let c = (v / self.resolution).floor();
            if !c.is_finite() || c < -(half as f64) || c >= half as f64 {
                return None;
            }
            *k = c as i32;
        }
        Some(key)
    }

    pub fn center_of(&self, key: &VoxelKey) -> Point3 {
        let r = self.resolution;
        Point3::new(
            (key[0] as f64 + 0.5) * r,
            (key[1] as f64 + 0.5) * r,
            (key[2] as f64 + 0.5) * r,
        )
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn get(&self, key: &VoxelKey) -> Option<f64> {
        self.leaves.get(key).copied()
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&VoxelKey, &f64)> {
        self.leaves.iter()
    }

    /// Set a leaf directly (clamped when clamping is on). Returns false if out of range.
    pub fn set(&mut self, key: VoxelKey, log_odds: f64) -> bool {
        let half = self.half_extent();
        if key.iter().any(|&k| (k as i64) < -half || (k as i64) >= half) {
            return false;
        }
        let v = self.clamp(log_odds);
        self.leaves.insert(key, v);
        true
    }

    fn clamp(&self, v: f64) -> f64 {
        if self.params.clamping {
            v.clamp(self.params.clamp_min, self.params.clamp_max)
        } else {
            v
        }
    }

    pub fn update(&mut self, key: VoxelKey, delta: f64) {
        let cur = self.leaves.get(&key).copied().unwrap_or(0.0);
        let v = self.clamp(cur + delta);
        self.leaves.insert(key, v);
    }

    /// Integrate one sensor-frame scan taken at `origin`.
    ///
    /// Every voxel a ray passes through receives one miss per scan; every
    /// endpoint voxel receives one hit per scan and no miss.
    pub fn integrate_scan(&mut self, cloud: &PointCloud, origin: &Pose) {
        let Some(start) = self.key_of(&origin.position()) else {
            return;
        };
        let mut occupied: HashSet<VoxelKey> = HashSet::new();
        let mut free: HashSet<VoxelKey> = HashSet::new();
        let o = origin.position();
        for p in &cloud.points {
            let end = origin.to_world(p);
            let Some(end_key) = self.key_of(&end) else {
                continue;
            };
            occupied.insert(end_key);
            self.traverse(&o, &end, start, end_key, |k| {
                free.insert(k);
            });
        }
        for k in free.difference(&occupied) {
            self.update(*k, self.params.l_miss);
        }
        for k in &occupied {
            self.update(*k, self.params.l_hit);
        }
    }

    /// 3D digital differential traversal from `from` to `to`, visiting every
    /// voxel strictly before the endpoint voxel.
    fn traverse(&self, from: &Point3, to: &Point3, start: VoxelKey, end: VoxelKey, mut visit: impl FnMut(VoxelKey)) {
        if start == end {
            return;
        }
        let res = self.resolution;
        let a = [from.x, from.y, from.z];
        let d = [to.x - from.x, to.y - from.y, to.z - from.z];
        let mut key = start;
        let mut step = [0i32; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for i in 0..3 {
            if d[i] > 0.0 {
                step[i] = 1;
                t_max[i] = ((key[i] as f64 + 1.0) * res - a[i]) / d[i];
                t_delta[i] = res / d[i];
            } else if d[i] < 0.0 {
                step[i] = -1;
                t_max[i] = (key[i] as f64 * res - a[i]) / d[i];
                t_delta[i] = -res / d[i];
            }
        }
        let budget: i64 = (0..3).map(|i| (end[i] as i64 - start[i] as i64).abs()).sum::<i64>() + 3;
        for _ in 0..budget {
            visit(key);
            let axis = if t_max[0] < t_max[1] {
                if t_max[0] < t_max[2] {
                    0
                } else {
                    2
                }
            } else if t_max[1] < t_max[2] {
                1
            } else {
                2
            };
            if t_max[axis] > 1.0 {
                break;
            }
            key[axis] += step[axis];
            t_max[axis] += t_delta[axis];
            if key == end {
                return;
            }
        }
    }

    /// Leaves whose centers fall inside the axis-aligned square of half-width
    /// `radius` around the center's planar position.
    pub fn crop_local(&self, center: &Pose, radius: f64) -> OccupancyOctree {
        let leaves = self
            .leaves
            .iter()
            .filter(|(k, _)| {
                let c = self.center_of(k);
                (c.x - center.x).abs() <= radius && (c.y - center.y).abs() <= radius
            })
            .map(|(k, v)| (*k, *v))
            .collect();
        OccupancyOctree {
            resolution: self.resolution,
            max_depth: self.max_depth,
            params: self.params,
            leaves,
        }
    }

    /// Sorted `key_x key_y key_z log_odds` lines.
    pub fn snapshot(&self) -> String {
        let mut keys: Vec<_> = self.leaves.iter().collect();
        keys.sort_by_key(|(k, _)| **k);
        let mut out = String::new();
        for (k, v) in keys {
            writeln!(out, "{} {} {} {}", k[0], k[1], k[2], v).unwrap();
        }
        out
    }

    pub fn write_snapshot(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.snapshot()).map_err(|e| Error::io(path, e))
    }

    pub fn read_snapshot(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::malformed(path, format!("line {}", i + 1));
            if f.is_empty() {
                continue;
            }
            if f.len() != 4 {
                return Err(bad());
            }
            let key = [
                f[0].parse().map_err(|_| bad())?,
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
            ];
            let v: f64 = f[3].parse().map_err(|_| bad())?;
            if !self.set(key, v) {
                return Err(bad());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn origin() -> Pose {
        Pose::new(0.1, 0.1, 0.1, 0.0, 0.0, 0.0)
    }

    #[test]
    fn single_hit_log_odds() {
        let mut map = OccupancyOctree::default();
        let cloud = PointCloud::new(0, 0.0, vec![Point3::new(2.0, 0.0, 0.0)]);
        map.integrate_scan(&cloud, &origin());
        let key = map.key_of(&Point3::new(2.1, 0.1, 0.1)).unwrap();
        assert!((map.get(&key).unwrap() - 0.8473).abs() < 1e-4);
        assert_eq!(map.get(&key).unwrap(), logit(0.7));
    }

    #[test]
    fn free_voxel_after_one_miss() {
        let mut map = OccupancyOctree::default();
        let cloud = PointCloud::new(0, 0.0, vec![Point3::new(2.0, 0.0, 0.0)]);
        map.integrate_scan(&cloud, &origin());
        let key = map.key_of(&Point3::new(1.1, 0.1, 0.1)).unwrap();
        assert!((map.get(&key).unwrap() + 0.4055).abs() < 1e-4);
        // ray passes through keys x = 0..=7, endpoint x = 8
        for x in 0..8 {
            assert_eq!(map.get(&[x, 0, 0]), Some(logit(0.4)), "x = {x}");
        }
        assert_eq!(map.len(), 9);
    }

    #[test]
    fn repeated_hits_clamp() {
        let mut map = OccupancyOctree::default();
        let cloud = PointCloud::new(0, 0.0, vec![Point3::new(2.0, 0.0, 0.0)]);
        for _ in 0..100 {
            map.integrate_scan(&cloud, &origin());
        }
        let key = map.key_of(&Point3::new(2.1, 0.1, 0.1)).unwrap();
        assert_eq!(map.get(&key).unwrap(), map.params.clamp_max);
        let free = map.key_of(&Point3::new(1.1, 0.1, 0.1)).unwrap();
        assert_eq!(map.get(&free).unwrap(), map.params.clamp_min);
    }

    #[test]
    fn diagonal_ray_is_connected() {
        let map = OccupancyOctree::default();
        let from = Point3::new(0.1, 0.05, 0.2);
        let to = Point3::new(-3.3, 4.7, 1.9);
        let (s, e) = (map.key_of(&from).unwrap(), map.key_of(&to).unwrap());
        let mut visited = Vec::new();
        map.traverse(&from, &to, s, e, |k| visited.push(k));
        visited.push(e);
        assert_eq!(visited[0], s);
        for w in visited.windows(2) {
            let manhattan: i32 = (0..3).map(|i| (w[0][i] - w[1][i]).abs()).sum();
            assert_eq!(manhattan, 1, "{w:?}");
        }
    }

    #[test]
    fn order_independent_without_clamping() {
        let params = LogOddsParams {
            clamping: false,
            ..LogOddsParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let scans: Vec<(PointCloud, Pose)> = (0..6)
            .map(|i| {
                let pts = (0..40)
                    .map(|_| Point3::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                (PointCloud::new(i, 0.0, pts), Pose::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.3, 0.0, 0.0, rng.gen_range(-3.0..3.0)))
            })
            .collect();
        let mut a = OccupancyOctree::with_params(0.25, 16, params);
        let mut b = OccupancyOctree::with_params(0.25, 16, params);
        for (c, p) in &scans {
            a.integrate_scan(c, p);
        }
        for (c, p) in scans.iter().rev() {
            b.integrate_scan(c, p);
        }
        assert_eq!(a.len(), b.len());
        for (k, v) in a.leaves() {
            assert!((v - b.get(k).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn stored_values_within_clamp_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut map = OccupancyOctree::new(0.5, 12);
        for i in 0..20 {
            let pts = (0..30)
                .map(|_| Point3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-1.0..1.0)))
                .collect();
            map.integrate_scan(&PointCloud::new(i, 0.0, pts), &Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        }
        let p = map.params;
        for (_, &v) in map.leaves() {
            assert!(v >= p.clamp_min && v <= p.clamp_max);
            let prob = probability(v);
            assert!(prob > 0.0 && prob < 1.0);
            assert!(prob >= probability(p.clamp_min) && prob <= probability(p.clamp_max));
        }
    }

    #[test]
    fn out_of_range_points_ignored() {
        let mut map = OccupancyOctree::new(1.0, 4); // keys in [-8, 8)
        let cloud = PointCloud::new(0, 0.0, vec![Point3::new(100.0, 0.0, 0.0)]);
        map.integrate_scan(&cloud, &Pose::default());
        assert!(map.is_empty());
        assert!(!map.set([8, 0, 0], 1.0));
    }

    #[test]
    fn crop_behaviour() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut map = OccupancyOctree::default();
        for _ in 0..500 {
            map.set([rng.gen_range(-200..200), rng.gen_range(-200..200), rng.gen_range(-4..4)], rng.gen_range(-2.0..3.0));
        }
        let center = Pose::planar(3.3, -7.1, 0.4);
        assert_eq!(map.crop_local(&center, 1e4).len(), map.len());
        let r = 12.0;
        let crop = map.crop_local(&center, r);
        let brute = map
            .leaves()
            .filter(|(k, _)| {
                let x = (k[0] as f64 + 0.5) * 0.25;
                let y = (k[1] as f64 + 0.5) * 0.25;
                x >= center.x - r && x <= center.x + r && y >= center.y - r && y <= center.y + r
            })
            .count();
        assert_eq!(crop.len(), brute);
        for (k, v) in crop.leaves() {
            assert_eq!(map.get(k), Some(*v));
        }

        let mut single = OccupancyOctree::default();
        single.set([80, 0, 0], 1.0); // center x = 20.125
        assert!(single.crop_local(&Pose::planar(0.0, 0.0, 0.0), 10.0).is_empty());
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut map = OccupancyOctree::default();
        map.set([1, -2, 3], 0.5);
        map.set([-7, 0, 0], -1.25);
        let p = dir.path().join("map.txt");
        map.write_snapshot(&p).unwrap();
        let mut back = OccupancyOctree::default();
        back.read_snapshot(&p).unwrap();
        assert_eq!(back, map);
        assert_eq!(map.snapshot(), "-7 0 0 -1.25\n1 -2 3 0.5\n");
    }
}
