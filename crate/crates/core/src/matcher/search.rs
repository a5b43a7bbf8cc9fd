//! Velocity-sweep sequence search over an enhanced difference matrix.

use rayon::prelude::*;

use super::DifferenceMatrix;
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqParams {
    /// Look-back length; routes span d_s + 1 test frames.
    pub d_s: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub v_step: f64,
    pub enhance_window: usize,
    /// A match is accepted iff its normalized score is strictly below this.
    pub score_threshold: f64,
}

impl Default for SeqParams {
    fn default() -> Self {
        Self {
            d_s: 10,
            v_min: 0.8,
            v_max: 1.1,
            v_step: 0.1,
            enhance_window: 10,
            score_threshold: 0.0,
        }
    }
}

impl SeqParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_min <= self.v_max) {
            return Err(Error::invalid("v_min must not exceed v_max"));
        }
        if !(self.v_step > 0.0) {
            return Err(Error::invalid("v_step must be > 0"));
        }
        if self.enhance_window == 0 {
            return Err(Error::invalid("enhance_window must be >= 1"));
        }
        Ok(())
    }

    /// {v_min, v_min + v_step, …, v_max}, inclusive of v_max up to a 1e-9 snap.
    pub fn velocities(&self) -> Vec<f64> {
        let n = ((self.v_max - self.v_min) / self.v_step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| {
                let v = self.v_min + i as f64 * self.v_step;
                if (v - self.v_max).abs() < 1e-9 {
                    self.v_max
                } else {
                    v
                }
            })
            .collect()
    }
}

/// Outcome of the route search for one test frame. `best_ref_index` anchors the
/// route at its oldest end, test frame `test_index − d_s`; see [`MatchResult::matched_ref`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult<T> {
    pub test_index: usize,
    pub best_ref_index: usize,
    pub best_velocity: f64,
    /// Route sum divided by route length d_s + 1; +∞ when no route is valid.
    pub score: T,
    pub accepted: bool,
}

impl<T: Scalar> MatchResult<T> {
    pub fn has_route(&self) -> bool {
        self.score.is_finite()
    }

    /// Reference frame the route visits at `test_index` itself.
    pub fn matched_ref(&self, d_s: usize) -> usize {
        route_row(self.best_ref_index, self.best_velocity, d_s, d_s) as usize
    }
}

/// Reference row visited `offset` frames after the start of a route anchored at `s`.
#[inline]
pub fn route_row(s: usize, velocity: f64, d_s: usize, offset: usize) -> f64 {
    debug_assert!(offset <= d_s);
    (s as f64 + velocity * offset as f64).round()
}

/// Normalized route score, or `None` when the route leaves the reference range.
pub fn sequence_score<T: Scalar>(matrix: &DifferenceMatrix<T>, test: usize, s: usize, velocity: f64, d_s: usize) -> Result<Option<T>> {
    if test < d_s {
        return Err(Error::InsufficientHistory { t: test, d_s });
    }
    if test >= matrix.cols() || s >= matrix.rows() {
        return Err(Error::invalid(format!("index ({s}, {test}) outside matrix")));
    }
    let last = matrix.rows() as f64 - 1.0;
    let mut sum = T::zero();
    let start = test - d_s;
    for t in start..=test {
        let k = route_row(s, velocity, d_s, t - start);
        if k < 0.0 || k > last {
            return Ok(None);
        }
        sum += matrix.get(k as usize, t);
    }
    Ok(Some(sum / T::of_usize(d_s + 1)))
}

/// Exhaustive sweep over reference index and velocity; lowest score wins,
/// ties go to the smaller reference index, then the smaller velocity.
pub fn best_match<T: Scalar>(matrix: &DifferenceMatrix<T>, test: usize, params: &SeqParams) -> Result<MatchResult<T>> {
    if test < params.d_s {
        return Err(Error::InsufficientHistory { t: test, d_s: params.d_s });
    }
    let velocities = params.velocities();
    let mut best: Option<(usize, f64, T)> = None;
    for s in 0..matrix.rows() {
        for &v in &velocities {
            if let Some(score) = sequence_score(matrix, test, s, v, params.d_s)? {
                if best.is_none_or(|(_, _, b)| score < b) {
                    best = Some((s, v, score));
                }
            }
        }
    }
    Ok(match best {
        Some((s, v, score)) => MatchResult {
            test_index: test,
            best_ref_index: s,
            best_velocity: v,
            score,
            accepted: score.as_f64() < params.score_threshold,
        },
        None => MatchResult {
            test_index: test,
            best_ref_index: 0,
            best_velocity: velocities[0],
            score: T::infinity(),
            accepted: false,
        },
    })
}

/// Best match for every test frame with enough history.
pub fn detect_loops<T: Scalar>(matrix: &DifferenceMatrix<T>, params: &SeqParams) -> Result<Vec<MatchResult<T>>> {
    params.validate()?;
    (params.d_s..matrix.cols())
        .into_par_iter()
        .map(|t| best_match(matrix, t, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_route(rows: usize, cols: usize, s: usize, test: usize, d_s: usize) -> DifferenceMatrix<f64> {
        let mut m = DifferenceMatrix::from_fn(rows, cols, |_, _| 1.0);
        for t in test - d_s..=test {
            m.set(s + t - (test - d_s), t, 0.0);
        }
        m
    }

    #[test]
    fn velocity_sweep_is_inclusive() {
        assert_eq!(SeqParams::default().velocities(), vec![0.8, 0.9, 1.0, 1.1]);
        let p = SeqParams {
            v_min: 1.0,
            v_max: 1.0,
            ..SeqParams::default()
        };
        assert_eq!(p.velocities(), vec![1.0]);
    }

    #[test]
    fn single_term_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DifferenceMatrix::from_fn(5, 5, |_, _| rng.gen_range(0.0..1.0));
        assert_eq!(sequence_score(&m, 3, 2, 1.0, 0).unwrap(), Some(m.get(2, 3)));
    }

    #[test]
    fn zero_route_scores() {
        let m = zero_route(40, 30, 15, 20, 10);
        assert_eq!(sequence_score(&m, 20, 15, 1.0, 10).unwrap(), Some(0.0));
        for v in [0.8, 0.9, 1.1] {
            assert!(sequence_score(&m, 20, 15, v, 10).unwrap().unwrap() > 0.0);
        }
        let params = SeqParams {
            score_threshold: 1e-12,
            ..SeqParams::default()
        };
        let r = best_match(&m, 20, &params).unwrap();
        assert_eq!((r.best_ref_index, r.best_velocity, r.score, r.accepted), (15, 1.0, 0.0, true));
        assert_eq!(r.matched_ref(10), 25);
    }

    #[test]
    fn out_of_range_route_is_invalid() {
        let m = DifferenceMatrix::from_fn(5, 20, |_, _| 0.0);
        assert_eq!(sequence_score(&m, 15, 3, 1.0, 10).unwrap(), None);
        assert_eq!(sequence_score(&m, 15, 0, 0.4, 10).unwrap(), Some(0.0));
        assert!(matches!(sequence_score(&m, 5, 3, 1.0, 10), Err(Error::InsufficientHistory { .. })));
        let r = best_match(&m, 15, &SeqParams::default()).unwrap();
        assert!(!r.accepted && r.score == f64::INFINITY);
    }

    #[test]
    fn ties_pick_smallest_index_then_velocity() {
        let m = DifferenceMatrix::from_fn(30, 30, |_, _| 0.5);
        let r = best_match(&m, 15, &SeqParams::default()).unwrap();
        assert_eq!((r.best_ref_index, r.best_velocity), (0, 0.8));
    }

    #[test]
    fn thresholds_at_infinity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = DifferenceMatrix::from_fn(30, 25, |_, _| rng.gen_range(-1.0..1.0));
        let none = SeqParams {
            score_threshold: f64::NEG_INFINITY,
            ..SeqParams::default()
        };
        assert!(detect_loops(&m, &none).unwrap().iter().all(|r| !r.accepted));
        let all = SeqParams {
            score_threshold: f64::INFINITY,
            ..SeqParams::default()
        };
        let res = detect_loops(&m, &all).unwrap();
        assert_eq!(res.len(), 15);
        assert!(res.iter().all(|r| r.accepted));
    }

    #[test]
    fn constant_shift_keeps_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = DifferenceMatrix::from_fn(40, 30, |_, _| rng.gen_range(-1.0..1.0));
        let shifted = m.map(|v: f64| v + 0.25);
        for t in 10..30 {
            let a = best_match(&m, t, &SeqParams::default()).unwrap();
            let b = best_match(&shifted, t, &SeqParams::default()).unwrap();
            assert_eq!((a.best_ref_index, a.best_velocity), (b.best_ref_index, b.best_velocity));
            assert!((b.score - a.score - 0.25).abs() < 1e-12);
        }
    }
}
