//! Synthetic 2.5D worlds: axis-aligned boxes standing on the ground plane.

use std::path::Path;

use ini::Ini;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn square(side: f64) -> Self {
        Self::new(0.0, 0.0, side, side)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn is_empty(&self) -> bool {
        !(self.width() > 0.0 && self.height() > 0.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn contains_rect(&self, r: &Rect) -> bool {
        self.contains(r.min_x, r.min_y) && self.contains(r.max_x, r.max_y)
    }
}

/// Box occupying `footprint` × [0, height].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub footprint: Rect,
    pub height: f64,
}

impl Obstacle {
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let f = self.footprint;
        Obstacle {
            footprint: Rect::new(f.min_x + dx, f.min_y + dy, f.max_x + dx, f.max_y + dy),
            height: self.height,
        }
    }

    /// Planar distance from a point to the footprint (0 inside).
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        let f = &self.footprint;
        let dx = (f.min_x - x).max(0.0).max(x - f.max_x);
        let dy = (f.min_y - y).max(0.0).max(y - f.max_y);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub bounds: Rect,
    pub obstacles: Vec<Obstacle>,
    pub seed: u64,
}

const MIN_SIDE: f64 = 2.0;
const MAX_SIDE: f64 = 10.0;
const MIN_HEIGHT: f64 = 2.0;
const MAX_HEIGHT: f64 = 8.0;

/// Scatter `n_obstacles` random boxes inside `bounds`. Deterministic per seed.
pub fn generate_world(seed: u64, n_obstacles: usize, bounds: Rect) -> Result<World> {
    if bounds.is_empty() || !bounds.width().is_finite() || !bounds.height().is_finite() {
        return Err(Error::invalid(format!("empty world bounds {bounds:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obstacles = (0..n_obstacles)
        .map(|_| {
            let w = rng.gen_range(MIN_SIDE..MAX_SIDE).min(bounds.width());
            let d = rng.gen_range(MIN_SIDE..MAX_SIDE).min(bounds.height());
            let x0 = bounds.min_x + rng.gen::<f64>() * (bounds.width() - w);
            let y0 = bounds.min_y + rng.gen::<f64>() * (bounds.height() - d);
            let height = rng.gen_range(MIN_HEIGHT..MAX_HEIGHT);
            Obstacle {
                footprint: Rect::new(x0, y0, (x0 + w).min(bounds.max_x), (y0 + d).min(bounds.max_y)),
                height,
            }
        })
        .collect();
    Ok(World {
        bounds,
        obstacles,
        seed,
    })
}

impl World {
    pub fn empty(bounds: Rect) -> Self {
        World {
            bounds,
            obstacles: Vec::new(),
            seed: 0,
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let b = self.bounds;
        World {
            bounds: Rect::new(b.min_x + dx, b.min_y + dy, b.max_x + dx, b.max_y + dy),
            obstacles: self.obstacles.iter().map(|o| o.translated(dx, dy)).collect(),
            seed: self.seed,
        }
    }

    /// Drop obstacles closer than `clearance` to any of the given polyline vertices
    /// or segments, so a trajectory along the polyline stays in free space.
    pub fn clear_corridor(&mut self, polyline: &[(f64, f64)], clearance: f64) {
        self.obstacles.retain(|o| {
            polyline.windows(2).all(|seg| {
                let (ax, ay) = seg[0];
                let (bx, by) = seg[1];
                let len = (bx - ax).hypot(by - ay);
                let n = (len / (clearance * 0.5)).ceil().max(1.0) as usize;
                (0..=n).all(|i| {
                    let s = i as f64 / n as f64;
                    o.distance_to(ax + s * (bx - ax), ay + s * (by - ay)) > clearance
                })
            })
        });
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut conf = Ini::new();
        let b = self.bounds;
        conf.with_section(Some("world"))
            .set("seed", self.seed.to_string())
            .set("bounds", format!("{} {} {} {}", b.min_x, b.min_y, b.max_x, b.max_y))
            .set("obstacles", self.obstacles.len().to_string());
        for (i, o) in self.obstacles.iter().enumerate() {
            let f = o.footprint;
            conf.with_section(Some(format!("obstacle.{i}")))
                .set("footprint", format!("{} {} {} {}", f.min_x, f.min_y, f.max_x, f.max_y))
                .set("height", o.height.to_string());
        }
        conf.write_to_file(path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let conf = Ini::load_from_file(path).map_err(|e| Error::malformed(path, e.to_string()))?;
        let get = |sec: &str, key: &str| -> Result<String> {
            conf.get_from(Some(sec), key)
                .map(str::to_owned)
                .ok_or_else(|| Error::malformed(path, format!("missing {sec}.{key}")))
        };
        let rect = |s: String| -> Result<Rect> {
            let v: Vec<f64> = s
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| Error::malformed(path, format!("bad rectangle {s:?}: {e}")))?;
            match v.as_slice() {
                [a, b, c, d] => Ok(Rect::new(*a, *b, *c, *d)),
                _ => Err(Error::malformed(path, format!("bad rectangle {s:?}"))),
            }
        };
        let num = |s: String| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|e| Error::malformed(path, format!("bad number {s:?}: {e}")))
        };
        let seed = num(get("world", "seed")?)? as u64;
        let bounds = rect(get("world", "bounds")?)?;
        let n = num(get("world", "obstacles")?)? as usize;
        let obstacles = (0..n)
            .map(|i| {
                let sec = format!("obstacle.{i}");
                Ok(Obstacle {
                    footprint: rect(get(&sec, "footprint")?)?,
                    height: num(get(&sec, "height")?)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(World {
            bounds,
            obstacles,
            seed,
        })
    }
}
