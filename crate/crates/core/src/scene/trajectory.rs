use super::{Pose, World};
use crate::error::{Error, Result};

/// Sensor mount height used for synthetic trajectories (KITTI velodyne).
pub const SENSOR_HEIGHT: f64 = 1.73;

/// Sample poses every `step_m` meters along the waypoint polyline, heading
/// tangent to the current segment.
pub fn make_trajectory(world: &World, waypoints: &[(f64, f64)], step_m: f64) -> Result<Vec<Pose>> {
    if waypoints.len() < 2 {
        return Err(Error::invalid("trajectory needs at least 2 waypoints"));
    }
    if !(step_m > 0.0 && step_m.is_finite()) {
        return Err(Error::invalid(format!("step must be > 0, got {step_m}")));
    }
    if let Some(&(x, y)) = waypoints.iter().find(|&&(x, y)| !world.bounds.contains(x, y)) {
        return Err(Error::invalid(format!("waypoint ({x}, {y}) outside world bounds")));
    }
    let segments: Vec<((f64, f64), (f64, f64), f64)> = waypoints
        .windows(2)
        .map(|w| (w[0], w[1], (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)))
        .filter(|s| s.2 > 0.0)
        .collect();
    if segments.is_empty() {
        return Err(Error::invalid("trajectory has zero length"));
    }
    let total: f64 = segments.iter().map(|s| s.2).sum();
    let count = (total / step_m + 1e-9).floor() as usize;

    let mut poses = Vec::with_capacity(count + 1);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for i in 0..=count {
        let s = (i as f64 * step_m).min(total);
        // Advance while s is at or beyond the segment end (exclusive of the last segment).
        while seg + 1 < segments.len() && s >= seg_start + segments[seg].2 - 1e-9 {
            seg_start += segments[seg].2;
            seg += 1;
        }
        let ((ax, ay), (bx, by), len) = segments[seg];
        let u = ((s - seg_start) / len).clamp(0.0, 1.0);
        let yaw = (by - ay).atan2(bx - ax);
        poses.push(Pose::new(
            ax + u * (bx - ax),
            ay + u * (by - ay),
            SENSOR_HEIGHT,
            0.0,
            0.0,
            yaw,
        ));
    }
    Ok(poses)
}

/// Closed square loop of side `side` starting at (x0, y0), repeated `laps` times.
pub fn square_loop(x0: f64, y0: f64, side: f64, laps: usize) -> Vec<(f64, f64)> {
    let corners = [(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)];
    let mut pts = Vec::with_capacity(4 * laps + 1);
    for _ in 0..laps {
        pts.extend_from_slice(&corners);
    }
    pts.push((x0, y0));
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Rect;

    fn world() -> World {
        World::empty(Rect::square(100.0))
    }

    #[test]
    fn straight_line_has_eleven_poses() {
        let poses = make_trajectory(&world(), &[(10.0, 10.0), (20.0, 10.0)], 1.0).unwrap();
        assert_eq!(poses.len(), 11);
        assert!(poses.iter().all(|p| p.yaw == 0.0));
    }

    #[test]
    fn closed_square_returns_to_start() {
        let poses = make_trajectory(&world(), &square_loop(20.0, 20.0, 60.0, 1), 2.5).unwrap();
        let (first, last) = (poses[0], *poses.last().unwrap());
        assert!(first.planar_distance(&last) <= 2.5);
    }

    #[test]
    fn two_laps_revisit() {
        let step = 2.4;
        let poses = make_trajectory(&world(), &square_loop(20.0, 20.0, 60.0, 2), step).unwrap();
        let lap = (240.0 / step + 1e-9).floor() as usize;
        assert_eq!(poses.len(), 2 * lap + 1);
        for i in 0..lap {
            assert!(poses[i].planar_distance(&poses[i + lap]) <= step, "pose {i}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(make_trajectory(&world(), &[(1.0, 1.0)], 1.0).is_err());
        assert!(make_trajectory(&world(), &[(1.0, 1.0), (2.0, 2.0)], 0.0).is_err());
        assert!(make_trajectory(&world(), &[(1.0, 1.0), (200.0, 2.0)], 1.0).is_err());
    }
}
