//! In-memory stage functions: maps, features, matching and evaluation.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{pr_curve, recall_at_full_precision, roc_auc, roc_curve, GroundTruth, PrPoint, RocPoint};
use crate::learner::{encode_all, BiGanModel};
use crate::matcher::{detect_loops, difference_matrix, enhance_local, sad_feature, DifferenceMatrix, MatchResult, Metric, SeqParams};
use crate::occupancy::{project_topview, GridSpec, OccupancyOctree, TopViewImage};
use crate::scene::{perturb_sequence, PerturbSpec, Pose};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSpec {
    pub grid: GridSpec,
    /// Octree leaf size, meters.
    pub resolution: f64,
    pub max_depth: u32,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self {
            grid: GridSpec {
                radius: 24.0,
                cell: 0.75,
                occupied_threshold: 0.5,
            },
            resolution: 0.25,
            max_depth: 16,
        }
    }
}

/// Poses used as projection centers: the true pose for reference frames and
/// the perturbed pose for test frames.
pub fn view_poses(ds: &Dataset, perturb: &PerturbSpec) -> Result<Vec<Pose>> {
    perturb.validate()?;
    let mut poses = ds.scan_poses()?;
    let split = ds.reference_frames.min(poses.len());
    let noisy = perturb_sequence(&poses[split..], perturb);
    poses[split..].copy_from_slice(&noisy);
    Ok(poses)
}

/// Integrate scans in order at their true poses and project the local map
/// around each frame's view pose.
pub fn build_maps(ds: &Dataset, spec: &MapSpec, perturb: &PerturbSpec) -> Result<Vec<TopViewImage>> {
    spec.grid.validate()?;
    if !(spec.resolution > 0.0) || !(1..=31).contains(&spec.max_depth) {
        return Err(Error::invalid("octree resolution must be > 0 and max_depth in 1..=31"));
    }
    let truth = ds.scan_poses()?;
    let views = view_poses(ds, perturb)?;
    let mut map = OccupancyOctree::new(spec.resolution, spec.max_depth);
    let crop = spec.grid.radius * SQRT_2 + spec.resolution;
    let mut out = Vec::with_capacity(ds.len());
    for ((scan, pose), view) in ds.scans.iter().zip(&truth).zip(&views) {
        map.integrate_scan(scan, pose);
        out.push(project_topview(&map.crop_local(view, crop), &spec.grid, view));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    StableAfl,
    BiganBaseline,
    Sad,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::StableAfl => "stable-afl",
            FeatureKind::BiganBaseline => "bigan-baseline",
            FeatureKind::Sad => "sad",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            FeatureKind::Sad => Metric::Sad,
            _ => Metric::SquaredEuclidean,
        }
    }

    pub fn is_learned(self) -> bool {
        self != FeatureKind::Sad
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stable-afl" | "safl" => Ok(FeatureKind::StableAfl),
            "bigan-baseline" | "bigan" => Ok(FeatureKind::BiganBaseline),
            "sad" => Ok(FeatureKind::Sad),
            _ => Err(Error::invalid(format!("unknown feature kind {s:?} (stable-afl, bigan-baseline, sad)"))),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Default block size for SAD downsampling of 64×64 maps.
pub const SAD_DOWN: usize = 2;

pub fn sad_features<T: Scalar>(images: &[TopViewImage], down: usize) -> Result<Vec<Vec<T>>> {
    images.iter().map(|im| sad_feature(im, down)).collect()
}

pub fn learned_features<T: Scalar>(model: &BiGanModel<T>, images: &[TopViewImage]) -> Result<Vec<Vec<T>>> {
    let ids: Vec<u32> = (0..images.len() as u32).collect();
    Ok(encode_all(model, images, &ids)?.into_iter().map(|c| c.values).collect())
}

#[derive(Debug, Clone)]
pub struct MatchOutput<T> {
    pub raw: DifferenceMatrix<T>,
    pub enhanced: DifferenceMatrix<T>,
    pub matches: Vec<MatchResult<T>>,
}

/// Frames before `reference_frames` are the reference sequence, the rest are
/// queries.
pub fn match_features<T: Scalar>(features: &[Vec<T>], reference_frames: usize, metric: Metric, params: &SeqParams) -> Result<MatchOutput<T>> {
    params.validate()?;
    if reference_frames == 0 || reference_frames >= features.len() {
        return Err(Error::invalid(format!(
            "reference split {reference_frames} leaves an empty sequence among {} frames",
            features.len()
        )));
    }
    let (reference, test) = features.split_at(reference_frames);
    let raw = difference_matrix(reference, test, metric)?;
    let enhanced = enhance_local(&raw, params.enhance_window);
    let matches = detect_loops(&enhanced, params)?;
    Ok(MatchOutput { raw, enhanced, matches })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub pr: Vec<PrPoint>,
    /// None when every match is correct or every match is wrong.
    pub roc: Option<Vec<RocPoint>>,
    pub auc: Option<f64>,
    pub recall_at_full_precision: f64,
    pub accepted: usize,
    pub frames: usize,
}

/// ROC inputs: one (score, correct) pair per query that has a route.
pub fn roc_inputs<T: Scalar>(matches: &[MatchResult<T>], gt: &GroundTruth, d_s: usize) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for m in matches.iter().filter(|m| m.has_route()) {
        scores.push(m.score.as_f64());
        labels.push(gt.is_correct(m.test_index, m.matched_ref(d_s))?);
    }
    Ok((scores, labels))
}

pub fn evaluate<T: Scalar>(matches: &[MatchResult<T>], gt: &GroundTruth, d_s: usize) -> Result<Evaluation> {
    let pr = pr_curve(matches, gt, d_s, 0)?;
    let (scores, labels) = roc_inputs(matches, gt, d_s)?;
    let (roc, auc) = match (roc_curve(&scores, &labels), roc_auc(&scores, &labels)) {
        (Ok(c), Ok(a)) => (Some(c), Some(a)),
        (Err(Error::UndefinedAuc), _) | (_, Err(Error::UndefinedAuc)) => (None, None),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    Ok(Evaluation {
        recall_at_full_precision: recall_at_full_precision(&pr),
        pr,
        roc,
        auc,
        accepted: matches.iter().filter(|m| m.accepted).count(),
        frames: matches.len(),
    })
}

/// Ground truth for a dataset split at its reference boundary.
pub fn ground_truth(ds: &Dataset, d_thresh: f64) -> Result<GroundTruth> {
    let poses = ds.scan_poses()?;
    let split = ds.reference_frames.min(poses.len());
    GroundTruth::new(poses[..split].to_vec(), poses[split..].to_vec(), d_thresh)
}
