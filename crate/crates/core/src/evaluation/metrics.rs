use crate::error::{Error, Result};
use crate::matcher::MatchResult;
use crate::scene::Pose;
use crate::Scalar;

pub const DEFAULT_D_THRESH: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub reference: Vec<Pose>,
    pub test: Vec<Pose>,
    /// Planar distance in meters under which two frames show the same place.
    pub d_thresh: f64,
}

impl GroundTruth {
    pub fn new(reference: Vec<Pose>, test: Vec<Pose>, d_thresh: f64) -> Result<Self> {
        if !(d_thresh > 0.0) {
            return Err(Error::invalid("D_thresh must be > 0"));
        }
        Ok(Self { reference, test, d_thresh })
    }

    fn test_pose(&self, t: usize) -> Result<&Pose> {
        self.test
            .get(t)
            .ok_or_else(|| Error::DataIntegrity(format!("no ground-truth pose for test frame {t}")))
    }

    /// True iff some reference frame lies within D_thresh of test frame `t`.
    pub fn has_loop(&self, t: usize) -> Result<bool> {
        let p = self.test_pose(t)?;
        Ok(self.reference.iter().any(|r| r.planar_distance(p) <= self.d_thresh))
    }

    /// True iff reference frame `s` lies within D_thresh of test frame `t`.
    pub fn is_correct(&self, t: usize, s: usize) -> Result<bool> {
        let p = self.test_pose(t)?;
        let r = self
            .reference
            .get(s)
            .ok_or_else(|| Error::DataIntegrity(format!("no ground-truth pose for reference frame {s}")))?;
        Ok(r.planar_distance(p) <= self.d_thresh)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Accepted and correct → TP, accepted and wrong → FP; a rejected frame is FN
/// if it has a true loop, TN otherwise. The matched reference frame is the
/// route's end aligned with the test frame (see [`MatchResult::matched_ref`]).
pub fn classify<T: Scalar>(matches: &[MatchResult<T>], gt: &GroundTruth, d_s: usize) -> Result<ConfusionCounts> {
    classify_at(matches, gt, d_s, |m| m.accepted)
}

fn classify_at<T: Scalar>(
    matches: &[MatchResult<T>],
    gt: &GroundTruth,
    d_s: usize,
    accept: impl Fn(&MatchResult<T>) -> bool,
) -> Result<ConfusionCounts> {
    let mut c = ConfusionCounts::default();
    for m in matches {
        if accept(m) {
            if gt.is_correct(m.test_index, m.matched_ref(d_s))? {
                c.tp += 1;
            } else {
                c.fp += 1;
            }
        } else if gt.has_loop(m.test_index)? {
            c.fn_ += 1;
        } else {
            c.tn += 1;
        }
    }
    Ok(c)
}

pub fn precision_recall(c: &ConfusionCounts) -> (f64, f64) {
    let precision = if c.tp + c.fp == 0 { 1.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
    let recall = if c.tp + c.fn_ == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
    (precision, recall)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// −∞, every distinct finite value ascending, +∞.
fn threshold_set(scores: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut t: Vec<f64> = scores.filter(|s| s.is_finite()).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t.insert(0, f64::NEG_INFINITY);
    t.push(f64::INFINITY);
    t
}

/// Keep `n` thresholds spread evenly over the full set, endpoints included.
/// `n == 0` or `n ≥ len` keeps all of them.
fn subsample(all: Vec<f64>, n: usize) -> Vec<f64> {
    if n == 0 || n >= all.len() {
        return all;
    }
    if n == 1 {
        return vec![all[all.len() - 1]];
    }
    let last = all.len() - 1;
    let mut picked: Vec<f64> = (0..n).map(|i| all[(i * last + (n - 1) / 2) / (n - 1)]).collect();
    picked.dedup();
    picked
}

/// Precision/recall as the acceptance threshold sweeps upward; a match is
/// accepted at threshold τ iff its score is strictly below τ.
pub fn pr_curve<T: Scalar>(matches: &[MatchResult<T>], gt: &GroundTruth, d_s: usize, n_thresholds: usize) -> Result<Vec<PrPoint>> {
    let thresholds = subsample(threshold_set(matches.iter().map(|m| m.score.as_f64())), n_thresholds);
    thresholds
        .into_iter()
        .map(|tau| {
            let c = classify_at(matches, gt, d_s, |m| m.score.as_f64() < tau)?;
            let (precision, recall) = precision_recall(&c);
            Ok(PrPoint { threshold: tau, precision, recall })
        })
        .collect()
}

pub fn recall_at_full_precision(curve: &[PrPoint]) -> f64 {
    curve
        .iter()
        .filter(|p| p.precision == 1.0)
        .map(|p| p.recall)
        .fold(0.0, f64::max)
}

/// ROC vertices for "lower score = more likely positive", one per distinct
/// score, from (0,0) to (1,1). The reported threshold is the score bound:
/// points with score ≤ threshold are called positive.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![scores.len()],
            found: vec![labels.len()],
        });
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    // Negate so that larger = more positive, then sweep from the top.
    let mut order: Vec<(f64, bool)> = scores.iter().map(|&s| -s).zip(labels.iter().copied()).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![RocPoint { threshold: f64::NEG_INFINITY, tpr: 0.0, fpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let v = order[i].0;
        while i < order.len() && order[i].0 == v {
            if order[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: -v,
            tpr: tp as f64 / pos as f64,
            fpr: fp as f64 / neg as f64,
        });
    }
    Ok(points)
}

/// Area under the ROC curve by the trapezoid rule, tied scores grouped.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let pts = roc_curve(scores, labels)?;
    Ok(pts
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_gt(n: usize) -> GroundTruth {
        let poses: Vec<Pose> = (0..n).map(|i| Pose::planar(i as f64, 0.0, 0.0)).collect();
        GroundTruth::new(poses.clone(), poses, 10.0).unwrap()
    }

    fn m(t: usize, s: usize, score: f64, accepted: bool) -> MatchResult<f64> {
        MatchResult {
            test_index: t,
            best_ref_index: s,
            best_velocity: 1.0,
            score,
            accepted,
        }
    }

    #[test]
    fn pr_arithmetic() {
        let c = ConfusionCounts { tp: 9, fp: 1, fn_: 9, tn: 0 };
        assert_eq!(precision_recall(&c), (0.9, 0.5));
        assert_eq!(precision_recall(&ConfusionCounts::default()), (1.0, 0.0));
    }

    #[test]
    fn classify_boundary() {
        let poses = vec![Pose::planar(0.0, 0.0, 0.0), Pose::planar(11.0, 0.0, 0.0)];
        let gt = GroundTruth::new(poses.clone(), vec![poses[0]], 10.0).unwrap();
        let c = classify(&[m(0, 1, 0.0, true)], &gt, 0).unwrap();
        assert_eq!(c.fp, 1);
        let c = classify(&[m(0, 0, 0.0, true)], &gt, 0).unwrap();
        assert_eq!(c.tp, 1);
        assert!(classify(&[m(5, 0, 0.0, true)], &gt, 0).is_err());
    }

    #[test]
    fn all_correct() {
        let gt = line_gt(5);
        let ms: Vec<_> = (0..5).map(|i| m(i, i, 0.0, true)).collect();
        let c = classify(&ms, &gt, 0).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (5, 0, 0));
    }

    #[test]
    fn auc_edge_cases() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedAuc)));
    }

    #[test]
    fn subsample_keeps_ends() {
        let all: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let s = subsample(all.clone(), 4);
        assert_eq!((s[0], *s.last().unwrap(), s.len()), (0.0, 9.0, 4));
        assert_eq!(subsample(all.clone(), 0), all);
    }
}
