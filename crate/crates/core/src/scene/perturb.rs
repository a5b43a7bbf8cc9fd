//! Viewpoint perturbation: planar translation noise and heading noise.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Pose;
use crate::error::{Error, Result};

/// Translation noise within a disk of radius `t_max` meters, heading noise
/// uniform in (−r_max/2, r_max/2) radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbSpec {
    pub t_max: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn new(t_max: f64, r_max: f64, seed: u64) -> Result<Self> {
        let spec = Self { t_max, r_max, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none() -> Self {
        Self {
            t_max: 0.0,
            r_max: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::invalid(format!("t_max must be >= 0, got {}", self.t_max)));
        }
        if !(self.r_max >= 0.0 && self.r_max.is_finite()) {
            return Err(Error::invalid(format!("r_max must be >= 0, got {}", self.r_max)));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.t_max == 0.0 && self.r_max == 0.0
    }

    /// `T{a}_R{b}` tag, e.g. `T5_R1.5`.
    pub fn tag(&self) -> String {
        format!("T{}_R{}", self.t_max, self.r_max)
    }

    /// Parse a `T{a}_R{b}` tag with the given seed.
    pub fn from_tag(tag: &str, seed: u64) -> Result<Self> {
        let tag: PerturbTag = tag.parse()?;
        Self::new(tag.t_max, tag.r_max, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbTag {
    pub t_max: f64,
    pub r_max: f64,
}

impl FromStr for PerturbTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("perturbation tag {s:?} is not of the form T<a>_R<b>"));
        let (t, r) = s.split_once('_').ok_or_else(bad)?;
        let t_max: f64 = t.strip_prefix('T').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let r_max: f64 = r.strip_prefix('R').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if !(t_max >= 0.0 && r_max >= 0.0) {
            return Err(bad());
        }
        Ok(Self { t_max, r_max })
    }
}

impl fmt::Display for PerturbTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}_R{}", self.t_max, self.r_max)
    }
}

/// Draw one perturbed pose. z, roll and pitch are untouched.
pub fn perturb_pose<R: Rng + ?Sized>(pose: &Pose, spec: &PerturbSpec, rng: &mut R) -> Pose {
    let (dx, dy) = if spec.t_max > 0.0 {
        let radius = spec.t_max * rng.gen::<f64>().sqrt();
        let angle = rng.gen_range(-PI..PI);
        (radius * angle.cos(), radius * angle.sin())
    } else {
        (0.0, 0.0)
    };
    let dyaw = if spec.r_max > 0.0 {
        let half = spec.r_max / 2.0;
        loop {
            let v = rng.gen_range(-half..half);
            if v != -half {
                break v;
            }
        }
    } else {
        0.0
    };
    if dx == 0.0 && dy == 0.0 && dyaw == 0.0 {
        return *pose;
    }
    Pose::new(pose.x + dx, pose.y + dy, pose.z, pose.roll, pose.pitch, pose.yaw + dyaw)
}

/// Perturb a whole sequence with a generator seeded from `spec.seed`.
pub fn perturb_sequence(poses: &[Pose], spec: &PerturbSpec) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    poses.iter().map(|p| perturb_pose(p, spec, &mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::normalize_angle;

    #[test]
    fn zero_amplitude_is_identity() {
        let pose = Pose::new(1.0, 2.0, 3.0, 0.1, 0.2, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(perturb_pose(&pose, &PerturbSpec::none(), &mut rng), pose);
    }

    #[test]
    fn offsets_respect_bounds() {
        let spec = PerturbSpec::new(5.0, 1.5, 9).unwrap();
        let pose = Pose::new(10.0, -4.0, 1.7, 0.0, 0.0, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut yaw_offsets = Vec::new();
        for _ in 0..10_000 {
            let p = perturb_pose(&pose, &spec, &mut rng);
            assert!(p.planar_distance(&pose) <= 5.0 + 1e-12);
            let dyaw = normalize_angle(p.yaw - pose.yaw);
            assert!(dyaw.abs() < 0.75 + 1e-12);
            assert_eq!((p.z, p.roll, p.pitch), (pose.z, pose.roll, pose.pitch));
            yaw_offsets.push(dyaw);
        }
        let n = yaw_offsets.len() as f64;
        let mean = yaw_offsets.iter().sum::<f64>() / n;
        // uniform on (−0.75, 0.75): σ = 1.5/√12
        let sigma_mean = (1.5 / 12f64.sqrt()) / n.sqrt();
        assert!(mean.abs() < 3.0 * sigma_mean, "mean {mean}");
    }

    #[test]
    fn same_seed_is_bit_reproducible() {
        let spec = PerturbSpec::new(2.0, 1.0, 42).unwrap();
        let poses: Vec<Pose> = (0..50).map(|i| Pose::planar(i as f64, 0.0, 0.0)).collect();
        assert_eq!(perturb_sequence(&poses, &spec), perturb_sequence(&poses, &spec));
    }

    #[test]
    fn tags_parse() {
        let s = PerturbSpec::from_tag("T5_R1.5", 0).unwrap();
        assert_eq!((s.t_max, s.r_max), (5.0, 1.5));
        assert_eq!(s.tag(), "T5_R1.5");
        assert_eq!(PerturbSpec::from_tag("T1_R1", 0).unwrap().tag(), "T1_R1");
        assert!(PerturbSpec::from_tag("5_R1", 0).is_err());
        assert!(PerturbSpec::from_tag("T-1_R1", 0).is_err());
        assert!(PerturbSpec::new(-1.0, 0.0, 0).is_err());
    }
}
