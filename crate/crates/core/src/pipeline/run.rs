//! Directory-level stages. Each reads the previous stage's artifacts from the
//! configured paths and writes its own.

use std::fs;
use std::path::{Path, PathBuf};

use ini::Ini;

use super::config::PipelineConfig;
use super::dataset::{generate_dataset, read_dataset, write_dataset, Dataset};
use super::stages::{build_maps, evaluate, ground_truth, learned_features, match_features, sad_features, FeatureKind};
use crate::error::{Error, Result};
use crate::evaluation::{emit_curves, Curve, CurvePoints, SummaryRecord};
use crate::learner::{read_codes, train, write_codes, BiGanModel, LatentCode, LossReport, TrainMode};
use crate::matcher::io::{matches_csv, parse_matches_csv, write_matrix};
use crate::matcher::MatchResult;
use crate::nn::Checkpoint;
use crate::occupancy::{frame_file_name, read_pgm, write_pgm, TopViewImage};

pub const MAPS_META: &str = "maps.ini";
pub const SUMMARY_FILE: &str = "summary.jsonl";
pub const MATCHES_FILE: &str = "matches.csv";
pub const DIFFERENCE_FILE: &str = "difference.sdmx";
pub const ENHANCED_FILE: &str = "enhanced.sdmx";

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact(path))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn dataset_gen(cfg: &PipelineConfig) -> Result<Dataset> {
    let ds = generate_dataset(&cfg.synthetic)?;
    write_dataset(&ds, &cfg.paths.dataset, "synthetic")?;
    Ok(ds)
}

/// Maps plus the reference split they were built with.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSet {
    pub images: Vec<TopViewImage>,
    pub reference_frames: usize,
    pub tag: String,
}

pub fn map_stage(cfg: &PipelineConfig) -> Result<MapSet> {
    let ds = read_dataset(&cfg.paths.dataset)?;
    let images = build_maps(&ds, &cfg.map, &cfg.perturb)?;
    let dir = &cfg.paths.maps;
    mkdir(dir)?;
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.flatten() {
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with("frame_") && name.ends_with(".pgm") {
            fs::remove_file(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
        }
    }
    for (i, img) in images.iter().enumerate() {
        write_pgm(dir.join(frame_file_name(i)), img)?;
    }
    let mut meta = Ini::new();
    meta.with_section(Some("maps"))
        .set("frames", images.len().to_string())
        .set("reference_frames", ds.reference_frames.to_string())
        .set("perturb", cfg.perturb.tag())
        .set("perturb_seed", cfg.perturb.seed.to_string());
    let path = dir.join(MAPS_META);
    meta.write_to_file(&path).map_err(|e| Error::io(&path, e))?;
    Ok(MapSet {
        images,
        reference_frames: ds.reference_frames,
        tag: cfg.perturb.tag(),
    })
}

pub fn read_maps(dir: impl AsRef<Path>) -> Result<MapSet> {
    let dir = dir.as_ref();
    let path = require(dir.join(MAPS_META))?;
    let meta = Ini::load_from_file(&path).map_err(|e| Error::malformed(&path, e.to_string()))?;
    let get = |k: &str| {
        meta.get_from(Some("maps"), k)
            .map(str::to_owned)
            .ok_or_else(|| Error::malformed(&path, format!("missing maps.{k}")))
    };
    let count = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::malformed(&path, format!("maps.{k} is not a count"))) };
    let frames = count("frames")?;
    let images = (0..frames)
        .map(|i| read_pgm(require(dir.join(frame_file_name(i)))?))
        .collect::<Result<Vec<_>>>()?;
    Ok(MapSet {
        images,
        reference_frames: count("reference_frames")?,
        tag: get("perturb")?,
    })
}

fn mode_feature(mode: TrainMode) -> FeatureKind {
    match mode {
        TrainMode::StableAfl => FeatureKind::StableAfl,
        TrainMode::Baseline => FeatureKind::BiganBaseline,
    }
}

pub fn checkpoint_path(cfg: &PipelineConfig, kind: FeatureKind) -> PathBuf {
    cfg.paths.checkpoints.join(format!("{}.safl", kind.name()))
}

pub fn loss_path(cfg: &PipelineConfig, kind: FeatureKind) -> PathBuf {
    cfg.paths.checkpoints.join(format!("{}_loss.csv", kind.name()))
}

/// Train on the reference maps and write the checkpoint and loss CSV.
pub fn train_stage(cfg: &PipelineConfig) -> Result<(BiGanModel<f64>, LossReport)> {
    cfg.validate()?;
    let maps = read_maps(&cfg.paths.maps)?;
    let images: Vec<Vec<f64>> = maps.images[..maps.reference_frames.min(maps.images.len())]
        .iter()
        .map(crate::learner::normalize_image)
        .collect();
    let model = BiGanModel::new(&cfg.arch, cfg.train.mode.head(), cfg.train.seed)?;
    let (model, report) = train(model, &images, &cfg.train)?;
    let kind = mode_feature(cfg.train.mode);
    mkdir(&cfg.paths.checkpoints)?;
    let meta = vec![
        ("mode".to_string(), kind.name().to_string()),
        ("iterations".to_string(), cfg.train.iterations.to_string()),
        ("seed".to_string(), cfg.train.seed.to_string()),
    ];
    model.to_checkpoint(meta).save(checkpoint_path(cfg, kind))?;
    report.write_csv(loss_path(cfg, kind))?;
    Ok((model, report))
}

pub fn codes_path(cfg: &PipelineConfig, kind: FeatureKind) -> PathBuf {
    cfg.paths.codes.join(format!("{}.safc", kind.name()))
}

/// Features for every map frame, written as a code file.
pub fn encode_stage(cfg: &PipelineConfig, kind: FeatureKind) -> Result<Vec<Vec<f64>>> {
    let maps = read_maps(&cfg.paths.maps)?;
    let features = if kind.is_learned() {
        let ck = Checkpoint::<f64>::load(require(checkpoint_path(cfg, kind))?)?;
        learned_features(&BiGanModel::from_checkpoint(&ck)?, &maps.images)?
    } else {
        sad_features(&maps.images, cfg.sad_down)?
    };
    let dim = features.first().map_or(0, Vec::len);
    let codes: Vec<LatentCode<f64>> = features
        .iter()
        .enumerate()
        .map(|(i, v)| LatentCode {
            frame_id: i as u32,
            values: v.clone(),
        })
        .collect();
    mkdir(&cfg.paths.codes)?;
    write_codes(codes_path(cfg, kind), &codes, dim)?;
    Ok(features)
}

pub fn results_dir(cfg: &PipelineConfig, kind: FeatureKind) -> PathBuf {
    cfg.paths.results.join(kind.name())
}

pub fn match_stage(cfg: &PipelineConfig, kind: FeatureKind) -> Result<Vec<MatchResult<f64>>> {
    let maps = read_maps(&cfg.paths.maps)?;
    let (_, codes) = read_codes::<f64>(require(codes_path(cfg, kind))?)?;
    if codes.len() != maps.images.len() {
        return Err(Error::DataIntegrity(format!(
            "{} codes for {} maps; re-run encode",
            codes.len(),
            maps.images.len()
        )));
    }
    let features: Vec<Vec<f64>> = codes.into_iter().map(|c| c.values).collect();
    let out = match_features(&features, maps.reference_frames, kind.metric(), &cfg.seq)?;
    let dir = results_dir(cfg, kind);
    mkdir(&dir)?;
    write_matrix(dir.join(DIFFERENCE_FILE), &out.raw)?;
    write_matrix(dir.join(ENHANCED_FILE), &out.enhanced)?;
    write_text(&dir.join(MATCHES_FILE), &matches_csv(&out.matches))?;
    Ok(out.matches)
}

/// Curves into the feature's results directory and one summary line.
pub fn eval_stage(cfg: &PipelineConfig, kind: FeatureKind) -> Result<SummaryRecord> {
    let maps = read_maps(&cfg.paths.maps)?;
    let mut ds = read_dataset(&cfg.paths.dataset)?;
    ds.reference_frames = maps.reference_frames;
    let dir = results_dir(cfg, kind);
    let path = require(dir.join(MATCHES_FILE))?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let matches: Vec<MatchResult<f64>> = parse_matches_csv(&text, &path)?;
    let gt = ground_truth(&ds, cfg.d_thresh)?;
    let e = evaluate(&matches, &gt, cfg.seq.d_s)?;
    let stem = format!("{}_{}", kind.name(), maps.tag);
    let mut curves = vec![Curve {
        name: format!("{stem}_pr"),
        points: CurvePoints::Pr(e.pr.clone()),
    }];
    if let Some(roc) = &e.roc {
        curves.push(Curve {
            name: format!("{stem}_roc"),
            points: CurvePoints::Roc(roc.clone()),
        });
    }
    emit_curves(&curves, &dir)?;
    let record = SummaryRecord {
        tag: maps.tag,
        features: kind.name().to_string(),
        auc: e.auc,
        recall_at_full_precision: e.recall_at_full_precision,
        accepted: e.accepted,
        frames: e.frames,
    };
    record.append_to(cfg.paths.results.join(SUMMARY_FILE))?;
    Ok(record)
}
