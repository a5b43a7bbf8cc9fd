//! Egocentric top-view projection of a local occupancy map.

use super::octree::{probability, OccupancyOctree};
use crate::error::{Error, Result};
use crate::scene::Pose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Half-width of the square window, meters.
    pub radius: f64,
    /// Pixel side, meters.
    pub cell: f64,
    pub occupied_threshold: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            radius: 30.0,
            cell: 0.25,
            occupied_threshold: 0.5,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid(format!("grid radius must be > 0, got {}", self.radius)));
        }
        if !(self.cell > 0.0 && self.cell.is_finite()) {
            return Err(Error::invalid(format!("grid cell must be > 0, got {}", self.cell)));
        }
        if !(self.occupied_threshold > 0.0 && self.occupied_threshold < 1.0) {
            return Err(Error::invalid("occupied_threshold must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn side(&self) -> usize {
        (2.0 * self.radius / self.cell).ceil() as usize
    }

    /// Pixel (row, col) containing a robot-frame planar point, if inside the grid.
    /// Row 0 is the far front (+x), column 0 the far left (+y).
    pub fn pixel_of(&self, forward: f64, left: f64) -> Option<(usize, usize)> {
        let side = self.side() as f64;
        let row = ((self.radius - forward) / self.cell).floor();
        let col = ((self.radius - left) / self.cell).floor();
        (row >= 0.0 && row < side && col >= 0.0 && col < side).then(|| (row as usize, col as usize))
    }
}

/// 8-bit grayscale, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TopViewImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub origin_pose: Pose,
    pub cell: f64,
}

impl TopViewImage {
    pub fn blank(side: usize, origin_pose: Pose, cell: f64) -> Self {
        Self {
            width: side,
            height: side,
            pixels: vec![0; side * side],
            origin_pose,
            cell,
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: vec![height, width],
                found: vec![pixels.len()],
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
            origin_pose: Pose::default(),
            cell: 1.0,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.pixels[row * self.width + col] = v;
    }

    pub fn count_occupied(&self) -> usize {
        self.pixels.iter().filter(|&&p| p > 0).count()
    }

    /// Pixels mapped to [−1, 1].
    pub fn normalized(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64 / 127.5 - 1.0).collect()
    }
}

/// Rotate a world-frame planar offset into the robot frame (forward, left).
fn to_robot(center: &Pose, dx: f64, dy: f64) -> (f64, f64) {
    let (s, c) = center.yaw.sin_cos();
    (c * dx + s * dy, -s * dx + c * dy)
}

/// Mark every pixel whose column contains an occupied leaf.
pub fn project_topview(local_map: &OccupancyOctree, grid: &GridSpec, center: &Pose) -> TopViewImage {
    let mut img = TopViewImage::blank(grid.side(), *center, grid.cell);
    for (key, &l) in local_map.leaves() {
        if probability(l) <= grid.occupied_threshold {
            continue;
        }
        let c = local_map.center_of(key);
        let (fwd, left) = to_robot(center, c.x - center.x, c.y - center.y);
        if let Some((r, col)) = grid.pixel_of(fwd, left) {
            img.set(r, col, 255);
        }
    }
    img
}
