//! Pipeline configuration: INI sections of `key = value` pairs.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use super::dataset::SyntheticSpec;
use super::stages::{FeatureKind, MapSpec, SAD_DOWN};
use crate::error::{Error, Result};
use crate::evaluation::DEFAULT_D_THRESH;
use crate::learner::{ArchConfig, TrainConfig, TrainMode};
use crate::matcher::SeqParams;
use crate::nn::OptimizerKind;
use crate::scene::{PerturbSpec, PerturbTag};

#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub dataset: PathBuf,
    pub maps: PathBuf,
    pub checkpoints: PathBuf,
    pub codes: PathBuf,
    pub results: PathBuf,
}

impl Paths {
    pub fn under(root: impl AsRef<Path>) -> Self {
        let r = root.as_ref();
        Self {
            dataset: r.join("dataset"),
            maps: r.join("maps"),
            checkpoints: r.join("checkpoints"),
            codes: r.join("codes"),
            results: r.join("results"),
        }
    }
}

impl Default for Paths {
    fn default() -> Self {
        Self::under("work")
    }
}

/// Everything a pipeline run needs. Defaults are the desk-scale profile: a
/// narrower network than [`ArchConfig::default`] and a larger learning rate
/// than [`TrainConfig::default`], so that the bundled world trains in minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub synthetic: SyntheticSpec,
    pub map: MapSpec,
    pub perturb: PerturbSpec,
    pub seq: SeqParams,
    pub d_thresh: f64,
    pub sad_down: usize,
    pub features: FeatureKind,
    pub train: TrainConfig,
    pub arch: ArchConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            synthetic: SyntheticSpec::default(),
            map: MapSpec::default(),
            perturb: PerturbSpec::none(),
            seq: SeqParams::default(),
            d_thresh: DEFAULT_D_THRESH,
            sad_down: SAD_DOWN,
            features: FeatureKind::StableAfl,
            train: TrainConfig {
                iterations: 420,
                learning_rate: 5e-4,
                rotation_augment: 2.0,
                ..TrainConfig::default()
            },
            arch: ArchConfig {
                channels: [4, 8, 16],
                disc_hidden: 64,
                ..ArchConfig::default()
            },
        }
    }
}

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("{section}.{key}: cannot parse {value:?}")))
}

fn mode_name(m: TrainMode) -> &'static str {
    match m {
        TrainMode::StableAfl => "stable-afl",
        TrainMode::Baseline => "bigan-baseline",
    }
}

pub fn parse_mode(s: &str) -> Result<TrainMode> {
    match s.trim() {
        "stable-afl" | "safl" => Ok(TrainMode::StableAfl),
        "bigan-baseline" | "bigan" | "baseline" => Ok(TrainMode::Baseline),
        other => Err(Error::invalid(format!("unknown training mode {other:?} (stable-afl, bigan-baseline)"))),
    }
}

fn optimizer_name(o: OptimizerKind) -> &'static str {
    match o {
        OptimizerKind::Sgd => "sgd",
        OptimizerKind::RmsProp { .. } => "rmsprop",
    }
}

impl PipelineConfig {
    /// Defaults with every path under `root`.
    pub fn under(root: impl AsRef<Path>) -> Self {
        Self {
            paths: Paths::under(root),
            ..Self::default()
        }
    }

    /// `(section, key, value)` for every setting, in file order.
    pub fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        let s = &self.synthetic;
        let l = &s.lidar;
        let m = &self.map;
        let q = &self.seq;
        let t = &self.train;
        let a = &self.arch;
        let p = |v: &PathBuf| v.display().to_string();
        let elev_min = l.elevation_angles.iter().copied().fold(f64::INFINITY, f64::min);
        let elev_max = l.elevation_angles.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        vec![
            ("paths", "dataset", p(&self.paths.dataset)),
            ("paths", "maps", p(&self.paths.maps)),
            ("paths", "checkpoints", p(&self.paths.checkpoints)),
            ("paths", "codes", p(&self.paths.codes)),
            ("paths", "results", p(&self.paths.results)),
            ("dataset", "seed", s.seed.to_string()),
            ("dataset", "world_side", s.world_side.to_string()),
            ("dataset", "obstacles", s.obstacles.to_string()),
            ("dataset", "loop_side", s.loop_side.to_string()),
            ("dataset", "laps", s.laps.to_string()),
            ("dataset", "step", s.step.to_string()),
            ("dataset", "clearance", s.clearance.to_string()),
            ("dataset", "azimuth_count", l.azimuth_count.to_string()),
            ("dataset", "rings", l.elevation_angles.len().to_string()),
            ("dataset", "elevation_min", elev_min.to_string()),
            ("dataset", "elevation_max", elev_max.to_string()),
            ("dataset", "max_range", l.max_range.to_string()),
            ("dataset", "range_noise", l.range_noise_sigma.to_string()),
            ("map", "radius", m.grid.radius.to_string()),
            ("map", "cell", m.grid.cell.to_string()),
            ("map", "occupied_threshold", m.grid.occupied_threshold.to_string()),
            ("map", "resolution", m.resolution.to_string()),
            ("map", "max_depth", m.max_depth.to_string()),
            ("map", "perturb", self.perturb.tag()),
            ("map", "perturb_seed", self.perturb.seed.to_string()),
            ("match", "d_s", q.d_s.to_string()),
            ("match", "v_min", q.v_min.to_string()),
            ("match", "v_max", q.v_max.to_string()),
            ("match", "v_step", q.v_step.to_string()),
            ("match", "enhance_window", q.enhance_window.to_string()),
            ("match", "score_threshold", q.score_threshold.to_string()),
            ("match", "d_thresh", self.d_thresh.to_string()),
            ("match", "sad_down", self.sad_down.to_string()),
            ("match", "features", self.features.name().to_string()),
            ("train", "mode", mode_name(t.mode).to_string()),
            ("train", "iterations", t.iterations.to_string()),
            ("train", "batch_size", t.batch_size.to_string()),
            ("train", "n_critic", t.n_critic.to_string()),
            ("train", "clip_c", t.clip_c.to_string()),
            ("train", "learning_rate", t.learning_rate.to_string()),
            ("train", "optimizer", optimizer_name(t.optimizer).to_string()),
            ("train", "lambda_x", t.lambdas.x.to_string()),
            ("train", "lambda_z", t.lambdas.z.to_string()),
            ("train", "lambda_cyc", t.lambdas.cyc.to_string()),
            ("train", "rotation_augment", t.rotation_augment.to_string()),
            ("train", "seed", t.seed.to_string()),
            ("train", "code_dim", a.code_dim.to_string()),
            ("train", "channels", a.channels.map(|c| c.to_string()).join(",")),
            ("train", "disc_hidden", a.disc_hidden.to_string()),
            ("train", "leaky_alpha", a.leaky_alpha.to_string()),
        ]
    }

    /// Set one value by section and key.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        macro_rules! p {
            () => {
                parse(section, key, v)?
            };
        }
        let l = &mut self.synthetic.lidar;
        match (section, key) {
            ("paths", "dataset") => self.paths.dataset = v.into(),
            ("paths", "maps") => self.paths.maps = v.into(),
            ("paths", "checkpoints") => self.paths.checkpoints = v.into(),
            ("paths", "codes") => self.paths.codes = v.into(),
            ("paths", "results") => self.paths.results = v.into(),
            ("dataset", "seed") => self.synthetic.seed = p!(),
            ("dataset", "world_side") => self.synthetic.world_side = p!(),
            ("dataset", "obstacles") => self.synthetic.obstacles = p!(),
            ("dataset", "loop_side") => self.synthetic.loop_side = p!(),
            ("dataset", "laps") => self.synthetic.laps = p!(),
            ("dataset", "step") => self.synthetic.step = p!(),
            ("dataset", "clearance") => self.synthetic.clearance = p!(),
            ("dataset", "azimuth_count") => l.azimuth_count = p!(),
            ("dataset", "rings") | ("dataset", "elevation_min") | ("dataset", "elevation_max") => {
                let n = l.elevation_angles.len();
                let lo = l.elevation_angles.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = l.elevation_angles.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (n, lo, hi) = match key {
                    "rings" => (p!(), lo, hi),
                    "elevation_min" => (n, p!(), hi),
                    _ => (n, lo, p!()),
                };
                l.elevation_angles = rings(n, lo, hi)?;
            }
            ("dataset", "max_range") => l.max_range = p!(),
            ("dataset", "range_noise") => l.range_noise_sigma = p!(),
            ("map", "radius") => self.map.grid.radius = p!(),
            ("map", "cell") => self.map.grid.cell = p!(),
            ("map", "occupied_threshold") => self.map.grid.occupied_threshold = p!(),
            ("map", "resolution") => self.map.resolution = p!(),
            ("map", "max_depth") => self.map.max_depth = p!(),
            ("map", "perturb") => {
                let tag: PerturbTag = v.parse()?;
                self.perturb = PerturbSpec::new(tag.t_max, tag.r_max, self.perturb.seed)?;
            }
            ("map", "perturb_seed") => self.perturb.seed = p!(),
            ("match", "d_s") => self.seq.d_s = p!(),
            ("match", "v_min") => self.seq.v_min = p!(),
            ("match", "v_max") => self.seq.v_max = p!(),
            ("match", "v_step") => self.seq.v_step = p!(),
            ("match", "enhance_window") => self.seq.enhance_window = p!(),
            ("match", "score_threshold") => self.seq.score_threshold = p!(),
            ("match", "d_thresh") => self.d_thresh = p!(),
            ("match", "sad_down") => self.sad_down = p!(),
            ("match", "features") => self.features = v.parse()?,
            ("train", "mode") => self.train.mode = parse_mode(v)?,
            ("train", "iterations") => self.train.iterations = p!(),
            ("train", "batch_size") => self.train.batch_size = p!(),
            ("train", "n_critic") => self.train.n_critic = p!(),
            ("train", "clip_c") => self.train.clip_c = p!(),
            ("train", "learning_rate") => self.train.learning_rate = p!(),
            ("train", "optimizer") => {
                self.train.optimizer = match v {
                    "sgd" => OptimizerKind::Sgd,
                    "rmsprop" => OptimizerKind::rmsprop(),
                    _ => return Err(Error::invalid(format!("train.optimizer: unknown optimizer {v:?} (sgd, rmsprop)"))),
                }
            }
            ("train", "lambda_x") => self.train.lambdas.x = p!(),
            ("train", "lambda_z") => self.train.lambdas.z = p!(),
            ("train", "lambda_cyc") => self.train.lambdas.cyc = p!(),
            ("train", "rotation_augment") => self.train.rotation_augment = p!(),
            ("train", "seed") => self.train.seed = p!(),
            ("train", "code_dim") => self.arch.code_dim = p!(),
            ("train", "channels") => {
                let c: Vec<usize> = v.split(',').map(|c| parse(section, key, c)).collect::<Result<_>>()?;
                self.arch.channels = c
                    .try_into()
                    .map_err(|_| Error::invalid("train.channels needs three comma-separated counts"))?;
            }
            ("train", "disc_hidden") => self.arch.disc_hidden = p!(),
            ("train", "leaky_alpha") => self.arch.leaky_alpha = p!(),
            _ => return Err(Error::invalid(format!("unknown setting {section}.{key}"))),
        }
        Ok(())
    }

    /// Apply `section.key=value`.
    pub fn set_dotted(&mut self, assignment: &str) -> Result<()> {
        let bad = || Error::invalid(format!("expected section.key=value, got {assignment:?}"));
        let (lhs, value) = assignment.split_once('=').ok_or_else(bad)?;
        let (section, key) = lhs.trim().split_once('.').ok_or_else(bad)?;
        self.set(section, key, value)
    }

    pub fn from_ini(ini: &Ini) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_ini(ini)?;
        Ok(cfg)
    }

    /// Overlay every value present in `ini`.
    pub fn apply_ini(&mut self, ini: &Ini) -> Result<()> {
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(Error::invalid(format!("setting {k:?} outside any section")));
                }
                continue;
            };
            for (k, v) in props.iter() {
                self.set(section, k, v)?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ini = Ini::load_from_file(path).map_err(|e| Error::malformed(path, e.to_string()))?;
        self.apply_ini(&ini).map_err(|e| Error::malformed(path, e.to_string()))
    }

    pub fn to_ini(&self) -> Ini {
        let mut ini = Ini::new();
        for (s, k, v) in self.entries() {
            ini.with_section(Some(s)).set(k, v);
        }
        ini
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_ini().write_to_file(path).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.synthetic.validate()?;
        self.map.grid.validate()?;
        self.perturb.validate()?;
        self.seq.validate()?;
        self.train.validate()?;
        self.arch.validate()?;
        if !(self.d_thresh > 0.0) {
            return Err(Error::invalid("match.d_thresh must be > 0"));
        }
        if self.map.grid.side() != self.arch.image_side {
            return Err(Error::invalid(format!(
                "map side {} (2·radius/cell) differs from the network input side {}",
                self.map.grid.side(),
                self.arch.image_side
            )));
        }
        Ok(())
    }
}

fn rings(n: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if n == 0 || !(lo <= hi) {
        return Err(Error::invalid("need rings >= 1 and elevation_min <= elevation_max"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_round_trip_through_ini() {
        let mut cfg = PipelineConfig::under("/tmp/x");
        cfg.set_dotted("train.iterations=7").unwrap();
        cfg.set_dotted("map.perturb=T5_R1.5").unwrap();
        cfg.set_dotted("train.channels=2,3,4").unwrap();
        cfg.set_dotted("dataset.rings=4").unwrap();
        let back = PipelineConfig::from_ini(&cfg.to_ini()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.perturb.tag(), "T5_R1.5");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.set("train", "lr", "0.1").is_err());
        assert!(cfg.set_dotted("iterations=3").is_err());
        assert!(cfg.set("train", "iterations", "many").is_err());
    }

    #[test]
    fn default_profile_is_consistent() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.map.grid.side(), 64);
        assert_eq!(cfg.seq, SeqParams::default());
    }
}
