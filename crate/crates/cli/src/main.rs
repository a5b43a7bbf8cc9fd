use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use safl_core::divergence::{triple_table, TABLE_THETAS};
use safl_core::learner::check::check_losses;
use safl_core::nn::gradcheck::{check_layer_kinds, GradCheck};
use safl_core::pipeline::run::{
    checkpoint_path, codes_path, dataset_gen, encode_stage, eval_stage, loss_path, map_stage, match_stage, results_dir,
    SUMMARY_FILE,
};
use safl_core::pipeline::{ingest_kitti, write_dataset, FeatureKind, PipelineConfig};
use safl_core::Error;

/// Adversarial feature learning for LiDAR loop closure, one stage per subcommand.
///
/// Settings come from the built-in defaults, then --root, then --config,
/// then --set, then the subcommand flags.
#[derive(Parser, Debug)]
#[command(name = "safl", version)]
struct Cli {
    /// INI config file ([section] key=value).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one setting, e.g. --set match.d_s=12. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Put every artifact directory under this root.
    #[arg(long, global = true, value_name = "DIR")]
    root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset or ingest KITTI scans.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Build the top-view map frames.
    Map(MapArgs),
    /// Train the feature extractor on the reference maps.
    Train(TrainArgs),
    /// Write latent codes (or SAD features) for every map frame.
    Encode(FeatureArgs),
    /// Difference matrix, enhancement and sequence matching.
    Match(FeatureArgs),
    /// PR/ROC curves and a summary line.
    Eval(FeatureArgs),
    /// Print the Wasserstein / JS / TV table over the parallel-line family.
    Divergence(DivergenceArgs),
    /// Finite-difference check of every layer kind and both losses.
    Gradcheck(GradcheckArgs),
    /// Print the effective configuration as INI.
    Config,
}

#[derive(Subcommand, Debug)]
enum DatasetCmd {
    /// Square-loop synthetic world.
    Gen {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        laps: Option<usize>,
        #[arg(long)]
        obstacles: Option<usize>,
    },
    /// Copy KITTI .bin scans and a pose file into dataset layout.
    Ingest {
        /// Directory of .bin scans, read in name order.
        #[arg(long, value_name = "DIR")]
        scans: PathBuf,
        /// Pose file, one line per scan.
        #[arg(long, value_name = "FILE")]
        poses: PathBuf,
        /// Reference sequence length (default: half the scans).
        #[arg(long)]
        reference_frames: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct MapArgs {
    /// Test-frame pose noise, e.g. T5_R1.5 (meters, radians).
    #[arg(long, value_name = "TAG")]
    perturb: Option<String>,
    #[arg(long)]
    perturb_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// stable-afl or bigan-baseline.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct FeatureArgs {
    /// stable-afl (safl), bigan-baseline (bigan) or sad.
    #[arg(long)]
    features: Option<String>,
}

#[derive(Args, Debug)]
struct DivergenceArgs {
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Offsets to tabulate (default: -1 -0.5 -0.01 -0.001 0 0.001 0.01 0.5 1).
    #[arg(long = "theta", allow_negative_numbers = true)]
    thetas: Vec<f64>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Seeds 0..N.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    /// Entries probed per tensor.
    #[arg(long, default_value_t = 64)]
    limit: usize,
}

fn defaults_help() -> String {
    let mut out = String::from("Defaults (config file sections; --set SECTION.KEY=VALUE):\n");
    let mut section = "";
    for (sec, key, value) in PipelineConfig::default().entries() {
        if sec != section {
            out.push_str(&format!("  [{sec}]\n"));
            section = sec;
        }
        out.push_str(&format!("    {key} = {value}\n"));
    }
    out.push_str(
        "\nSequence matching: d_s is the look-back in frames, v_min..v_max by v_step the\n\
         route slopes, d_thresh the ground-truth radius in meters, enhance_window the\n\
         local normalization half-width. A match is accepted when its score is below\n\
         score_threshold.\n\
         \nExit status: 0 on success, 2 on malformed input files or bad usage, 1 otherwise.",
    );
    out
}

fn build_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &cli.root {
        Some(root) => PipelineConfig::under(root),
        None => PipelineConfig::default(),
    };
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for s in &cli.overrides {
        cfg.set_dotted(s).with_context(|| format!("--set {s}"))?;
    }
    Ok(cfg)
}

fn feature_kind(cfg: &PipelineConfig, arg: &Option<String>) -> anyhow::Result<FeatureKind> {
    Ok(match arg {
        Some(s) => s.parse()?,
        None => cfg.features,
    })
}

fn print_checks(checks: &[GradCheck]) -> bool {
    let mut ok = true;
    for c in checks {
        let p = c.probe;
        println!(
            "{:<24} checked {:>5} kinks {:>3} max_rel {:.3e} {}",
            c.name,
            p.checked,
            p.kinks,
            p.max_rel_error,
            if c.passed() { "ok" } else { "FAIL" }
        );
        ok &= c.passed();
    }
    ok
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = build_config(&cli)?;
    match cli.command {
        Command::Dataset(DatasetCmd::Gen { seed, laps, obstacles }) => {
            if let Some(v) = seed {
                cfg.synthetic.seed = v;
            }
            if let Some(v) = laps {
                cfg.synthetic.laps = v;
            }
            if let Some(v) = obstacles {
                cfg.synthetic.obstacles = v;
            }
            let ds = dataset_gen(&cfg)?;
            println!(
                "{}: {} frames, {} reference",
                cfg.paths.dataset.display(),
                ds.len(),
                ds.reference_frames
            );
        }
        Command::Dataset(DatasetCmd::Ingest {
            scans,
            poses,
            reference_frames,
        }) => {
            let ds = ingest_kitti(&scans, &poses, reference_frames)?;
            write_dataset(&ds, &cfg.paths.dataset, "kitti")?;
            println!(
                "{}: {} frames, {} reference",
                cfg.paths.dataset.display(),
                ds.len(),
                ds.reference_frames
            );
        }
        Command::Map(a) => {
            if let Some(tag) = &a.perturb {
                cfg.set("map", "perturb", tag)?;
            }
            if let Some(s) = a.perturb_seed {
                cfg.perturb.seed = s;
            }
            let t = Instant::now();
            let maps = map_stage(&cfg)?;
            println!(
                "{}: {} frames ({}) in {:.1}s",
                cfg.paths.maps.display(),
                maps.images.len(),
                maps.tag,
                t.elapsed().as_secs_f64()
            );
        }
        Command::Train(a) => {
            if let Some(m) = &a.mode {
                cfg.set("train", "mode", m)?;
            }
            if let Some(n) = a.iterations {
                cfg.train.iterations = n;
            }
            if let Some(s) = a.seed {
                cfg.train.seed = s;
            }
            let t = Instant::now();
            let (_, report) = safl_core::pipeline::run::train_stage(&cfg)?;
            let kind = match cfg.train.mode {
                safl_core::learner::TrainMode::StableAfl => FeatureKind::StableAfl,
                safl_core::learner::TrainMode::Baseline => FeatureKind::BiganBaseline,
            };
            println!(
                "{} after {} iterations in {:.1}s",
                checkpoint_path(&cfg, kind).display(),
                report.records.len(),
                t.elapsed().as_secs_f64()
            );
            println!("{}", loss_path(&cfg, kind).display());
        }
        Command::Encode(a) => {
            let kind = feature_kind(&cfg, &a.features)?;
            let feats = encode_stage(&cfg, kind)?;
            println!(
                "{}: {} codes of dim {}",
                codes_path(&cfg, kind).display(),
                feats.len(),
                feats.first().map_or(0, Vec::len)
            );
        }
        Command::Match(a) => {
            let kind = feature_kind(&cfg, &a.features)?;
            let matches = match_stage(&cfg, kind)?;
            let accepted = matches.iter().filter(|m| m.accepted).count();
            println!(
                "{}: {} queries, {} accepted",
                results_dir(&cfg, kind).display(),
                matches.len(),
                accepted
            );
        }
        Command::Eval(a) => {
            let kind = feature_kind(&cfg, &a.features)?;
            let record = eval_stage(&cfg, kind)?;
            println!("{}", serde_json::to_string(&record)?);
            eprintln!("appended to {}", cfg.paths.results.join(SUMMARY_FILE).display());
        }
        Command::Divergence(a) => {
            let thetas = if a.thetas.is_empty() { TABLE_THETAS.to_vec() } else { a.thetas };
            let table = triple_table(&thetas);
            match &a.out {
                Some(p) => fs::write(p, &table).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{table}"),
            }
        }
        Command::Gradcheck(a) => {
            let mut ok = true;
            for seed in 0..a.seeds {
                println!("seed {seed}");
                ok &= print_checks(&check_layer_kinds(seed, a.limit)?);
                ok &= print_checks(&check_losses(seed, a.limit)?);
            }
            if !ok {
                bail!("gradient check failed");
            }
        }
        Command::Config => print!("{}", cfg_ini(&cfg)?),
    }
    Ok(())
}

fn cfg_ini(cfg: &PipelineConfig) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    cfg.to_ini().write_to(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::MalformedFile { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(defaults_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
