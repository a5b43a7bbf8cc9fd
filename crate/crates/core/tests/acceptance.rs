//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::HashSet;
use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safl_core::divergence::{jsd, parallel_lines_triple, value_at_optimum, DiscreteDist};
use safl_core::evaluation::{pr_curve, roc_auc, GroundTruth};
use safl_core::learner::check::{check_losses, micro_arch, micro_batch};
use safl_core::learner::code::{encode_code_file, payload_bytes};
use safl_core::learner::{normalize_image, ArchConfig, BiGanModel, JointHead, LatentCode, TrainConfig, TrainMode, Trainer};
use safl_core::matcher::{best_match, enhance_local, DifferenceMatrix, MatchResult, Metric, SeqParams};
use safl_core::nn::gradcheck::check_layer_kinds;
use safl_core::occupancy::{project_topview, GridSpec, OccupancyOctree, TopViewImage};
use safl_core::pipeline::{
    build_maps, evaluate, generate_dataset, ground_truth, learned_features, match_features, sad_features, Dataset, MapSpec,
    SyntheticSpec, SAD_DOWN,
};
use safl_core::scene::{PerturbSpec, Pose};
use safl_core::Error;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---- 1 ----------------------------------------------------------------

fn random_joint(rng: &mut ChaCha8Rng) -> DiscreteDist<f64> {
    let n = rng.gen_range(1..=8);
    let mut support = Vec::new();
    let mut seen = HashSet::new();
    while support.len() < n {
        let atom = (rng.gen_range(0..4i32), rng.gen_range(0..3i32));
        if seen.insert(atom) {
            support.push(vec![atom.0 as f64, atom.1 as f64]);
        }
    }
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    DiscreteDist::from_weights(support, &w).unwrap()
}

fn divergence_identity() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (p, q) = (random_joint(&mut rng), random_joint(&mut rng));
        let err = (value_at_optimum(&p, &q) - (2.0 * jsd(&p, &q) - 2.0 * LN_2)).abs();
        worst = worst.max(err);
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(worst < 1e-9 && secs < 1.0, format!("max |V* − (2 JSD − 2 ln 2)| = {worst:.2e} over 100 pairs, {secs:.3}s"))
}

// ---- 2 ----------------------------------------------------------------

fn parallel_lines() -> Outcome {
    let mut bad = Vec::new();
    for theta in [0.0, 0.001, -0.001, 0.01, -0.01, 0.5, -0.5, 1.0, -1.0] {
        let (w, js, tv) = parallel_lines_triple(theta);
        let apart = theta != 0.0;
        let ok = (w - f64::abs(theta)).abs() <= 1e-12
            && js == if apart { LN_2 } else { 0.0 }
            && tv == if apart { 1.0 } else { 0.0 };
        if !ok {
            bad.push(format!("θ={theta}: ({w}, {js}, {tv})"));
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "9 offsets exact".to_string() } else { bad.join("; ") })
}

// ---- 3 ----------------------------------------------------------------

fn gradients() -> Outcome {
    let t = Instant::now();
    let mut checks = 0;
    let mut failed = Vec::new();
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let mut all = check_layer_kinds(seed, 500).unwrap();
        all.extend(check_losses(seed, 400).unwrap());
        for c in all {
            checks += 1;
            worst = worst.max(c.probe.max_rel_error);
            if !c.passed() {
                failed.push(format!("seed {seed} {}", c.name));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        failed.is_empty() && secs < 30.0,
        format!("{checks} checks, max rel error {worst:.2e}, {secs:.1}s{}", if failed.is_empty() { String::new() } else { format!(", failed: {}", failed.join(", ")) }),
    )
}

// ---- 4 ----------------------------------------------------------------

fn clipping() -> Outcome {
    let arch = micro_arch();
    let (x, _) = micro_batch(&arch, 16, 5);
    let data: Vec<Vec<f64>> = (0..16).map(|i| x.row(i).to_vec()).collect();
    let cfg = TrainConfig {
        iterations: 200,
        batch_size: 4,
        learning_rate: 1e-2,
        seed: 3,
        ..TrainConfig::default()
    };
    let model = BiGanModel::<f64>::new(&arch, JointHead::Critic, 3).unwrap();
    let mut tr = Trainer::new(model, &data, cfg.clone()).unwrap();
    let (mut steps, mut outside, mut max_abs) = (0usize, 0usize, 0.0f64);
    for _ in 0..cfg.iterations {
        tr.step_observed(|j| {
            steps += 1;
            for w in j.params_flat() {
                max_abs = max_abs.max(w.abs());
                if !(-0.01..=0.01).contains(&w) {
                    outside += 1;
                }
            }
        })
        .unwrap();
    }
    outcome(
        outside == 0 && steps == 200 * cfg.n_critic,
        format!("{steps} critic steps, {outside} parameters outside the box, max |w| = {max_abs}"),
    )
}

// ---- 5 ----------------------------------------------------------------

fn brute_force(m: &DifferenceMatrix<f64>, test: usize, p: &SeqParams) -> Option<(usize, f64, f64)> {
    let n_v = ((p.v_max - p.v_min) / p.v_step).round() as usize;
    let velocities: Vec<f64> = (0..=n_v).map(|i| if i == n_v { p.v_max } else { p.v_min + i as f64 * p.v_step }).collect();
    let mut best: Option<(usize, f64, f64)> = None;
    for s in 0..m.rows() {
        for &v in &velocities {
            let mut sum = 0.0;
            let mut valid = true;
            for (j, t) in (test - p.d_s..=test).enumerate() {
                let k = (s as f64 + v * j as f64).round();
                if k < 0.0 || k >= m.rows() as f64 {
                    valid = false;
                    break;
                }
                sum += m.get(k as usize, t);
            }
            if !valid {
                continue;
            }
            let score = sum / (p.d_s + 1) as f64;
            if best.is_none_or(|b| score < b.2) {
                best = Some((s, v, score));
            }
        }
    }
    best
}

fn matcher_oracle() -> Outcome {
    let t = Instant::now();
    let p = SeqParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut compared, mut mismatches) = (0usize, 0usize);
    for _ in 0..20 {
        let raw = DifferenceMatrix::from_fn(50, 200, |_, _| rng.gen_range(0.0..10.0));
        let m = enhance_local(&raw, p.enhance_window);
        for test in p.d_s..m.cols() {
            let got = best_match(&m, test, &p).unwrap();
            let want = brute_force(&m, test, &p);
            compared += 1;
            let same = match want {
                Some((s, v, score)) => got.best_ref_index == s && got.best_velocity == v && got.score == score,
                None => !got.has_route(),
            };
            if !same {
                mismatches += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(mismatches == 0 && secs < 10.0, format!("{compared} queries, {mismatches} mismatches, {secs:.2}s"))
}

// ---- 6 ----------------------------------------------------------------

fn enhancement_moments() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_mu, mut worst_sigma) = (0.0f64, 0.0f64);
    let mut columns = 0;
    for _ in 0..20 {
        let rows = rng.gen_range(2..60);
        let cols = rng.gen_range(1..20);
        let scale = rng.gen_range(0.1..100.0);
        let raw = DifferenceMatrix::from_fn(rows, cols, |_, _| rng.gen_range(0.0..scale));
        let e = enhance_local(&raw, rows + rng.gen_range(0..5));
        for c in 0..cols {
            let col = e.column(c);
            let n = col.len() as f64;
            let mu = col.iter().sum::<f64>() / n;
            let sigma = (col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
            worst_mu = worst_mu.max(mu.abs());
            worst_sigma = worst_sigma.max((sigma - 1.0).abs());
            columns += 1;
        }
    }
    outcome(
        worst_mu < 1e-9 && worst_sigma < 1e-9,
        format!("{columns} columns, max |μ| = {worst_mu:.1e}, max |σ − 1| = {worst_sigma:.1e}"),
    )
}

// ---- 7 ----------------------------------------------------------------

fn raster_oracle(voxels: &[([i32; 3], f64)], res: f64, grid: &GridSpec, center: &Pose) -> Vec<u8> {
    let side = (2.0 * grid.radius / grid.cell).ceil() as usize;
    let mut px = vec![0u8; side * side];
    let threshold = (grid.occupied_threshold / (1.0 - grid.occupied_threshold)).ln();
    for (k, l) in voxels {
        if *l <= threshold {
            continue;
        }
        let wx = (k[0] as f64 + 0.5) * res - center.x;
        let wy = (k[1] as f64 + 0.5) * res - center.y;
        let (sin, cos) = center.yaw.sin_cos();
        let fwd = cos * wx + sin * wy;
        let left = cos * wy - sin * wx;
        let row = ((grid.radius - fwd) / grid.cell).floor();
        let col = ((grid.radius - left) / grid.cell).floor();
        if row >= 0.0 && col >= 0.0 && (row as usize) < side && (col as usize) < side {
            px[row as usize * side + col as usize] = 255;
        }
    }
    px
}

fn projection_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut mismatched, mut dup_changed) = (0, 0);
    for case in 0..50 {
        let res = 0.25;
        let grid = GridSpec {
            radius: rng.gen_range(2.0..8.0),
            cell: [0.25, 0.5, 0.3][case % 3],
            occupied_threshold: 0.5,
        };
        let center = Pose::planar(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.2..3.2));
        let n = if case < 25 { 1 } else { rng.gen_range(2..200) };
        let mut map = OccupancyOctree::new(res, 16);
        let mut voxels = Vec::new();
        for _ in 0..n {
            let key = [rng.gen_range(-40..40), rng.gen_range(-40..40), rng.gen_range(-4..12)];
            let l = if case < 25 { 2.0 } else { rng.gen_range(-2.0..3.0) };
            if map.get(&key).is_none() {
                map.set(key, l);
                voxels.push((key, l));
            }
        }
        let img = project_topview(&map, &grid, &center);
        if img.pixels != raster_oracle(&voxels, res, &grid, &center) {
            mismatched += 1;
        }
        let mut dup = map.clone();
        for (k, l) in &voxels {
            for dz in 1..4 {
                let up = [k[0], k[1], k[2] + 20 * dz];
                if dup.get(&up).is_none() && *l > 0.0 {
                    dup.set(up, *l);
                }
            }
        }
        if project_topview(&dup, &grid, &center).pixels != img.pixels {
            dup_changed += 1;
        }
    }
    outcome(
        mismatched == 0 && dup_changed == 0,
        format!("50 maps: {mismatched} differ from the oracle, {dup_changed} change under z-duplication"),
    )
}

// ---- 8 ----------------------------------------------------------------

fn storage() -> Outcome {
    let code = LatentCode {
        frame_id: 0,
        values: vec![0.5f64; 1024],
    };
    let one = encode_code_file(&[code.clone()], 1024).unwrap().len();
    let two = encode_code_file(&[code.clone(), code], 1024).unwrap().len();
    let per_code = two - one - 4;
    outcome(
        payload_bytes(1024) == 4096 && per_code == 4096,
        format!("payload {} bytes, file grows by {per_code} + 4 per code", payload_bytes(1024)),
    )
}

// ---- 9 ----------------------------------------------------------------

fn pr_oracle(matches: &[MatchResult<f64>], ref_x: &[f64], test_x: &[f64], d: f64) -> Vec<(f64, f64, f64)> {
    let mut taus: Vec<f64> = matches.iter().map(|m| m.score).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    taus.insert(0, f64::NEG_INFINITY);
    taus.push(f64::INFINITY);
    taus.into_iter()
        .map(|tau| {
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for m in matches {
                let tx = test_x[m.test_index];
                if m.score < tau {
                    if (ref_x[m.best_ref_index] - tx).abs() <= d {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                } else if ref_x.iter().any(|r| (r - tx).abs() <= d) {
                    fn_ += 1;
                }
            }
            let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
            let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            (tau, precision, recall)
        })
        .collect()
}

fn mann_whitney(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &a) in scores.iter().enumerate() {
        for (j, &b) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if a < b {
                    1.0
                } else if a == b {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn metrics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = 2.0;
    let (mut pr_bad, mut auc_worst, mut sets) = (0, 0.0f64, 0);
    while sets < 50 {
        let n_ref = rng.gen_range(5..30);
        let n_test = rng.gen_range(5..40);
        let ref_x: Vec<f64> = (0..n_ref).map(|i| i as f64).collect();
        let test_x: Vec<f64> = (0..n_test).map(|_| rng.gen_range(-10.0..40.0)).collect();
        let gt = GroundTruth::new(
            ref_x.iter().map(|&x| Pose::planar(x, 0.0, 0.0)).collect(),
            test_x.iter().map(|&x| Pose::planar(x, 0.0, 0.0)).collect(),
            d,
        )
        .unwrap();
        let levels = rng.gen_range(2..12);
        let matches: Vec<MatchResult<f64>> = (0..n_test)
            .map(|t| MatchResult {
                test_index: t,
                best_ref_index: rng.gen_range(0..n_ref),
                best_velocity: 1.0,
                score: rng.gen_range(0..levels) as f64 * 0.25,
                accepted: false,
            })
            .collect();
        let curve: Vec<(f64, f64, f64)> = pr_curve(&matches, &gt, 0, 0)
            .unwrap()
            .iter()
            .map(|p| (p.threshold, p.precision, p.recall))
            .collect();
        if curve != pr_oracle(&matches, &ref_x, &test_x, d) {
            pr_bad += 1;
        }
        let scores: Vec<f64> = matches.iter().map(|m| m.score).collect();
        let labels: Vec<bool> = matches.iter().map(|m| (ref_x[m.best_ref_index] - test_x[m.test_index]).abs() <= d).collect();
        match roc_auc(&scores, &labels) {
            Ok(a) => {
                auc_worst = auc_worst.max((a - mann_whitney(&scores, &labels)).abs());
                sets += 1;
            }
            Err(Error::UndefinedAuc) => {}
            Err(e) => return outcome(false, format!("roc_auc: {e}")),
        }
    }
    let perfect = roc_auc(&[0.1, 0.2, 0.8, 0.9], &[true, true, false, false]).unwrap();
    let constant = roc_auc(&[0.5; 6], &[true, false, true, false, false, true]).unwrap();
    outcome(
        pr_bad == 0 && auc_worst <= 1e-12 && perfect == 1.0 && constant == 0.5,
        format!("50 sets: {pr_bad} PR mismatches, max AUC error {auc_worst:.1e}; perfect {perfect}, constant {constant}"),
    )
}

// ---- 10, 11 -----------------------------------------------------------

const SEEDS: u64 = 3;
const EPOCHS: usize = 60;
const LEARNING_RATE: f64 = 5e-4;
const ROTATION_AUGMENT: f64 = 2.0;

struct Scene {
    ds: Dataset,
    clean: Vec<TopViewImage>,
    rotated: Vec<TopViewImage>,
    gt: GroundTruth,
    params: SeqParams,
}

impl Scene {
    fn auc_of(&self, features: &[Vec<f64>], metric: Metric) -> Option<f64> {
        let out = match_features(features, self.ds.reference_frames, metric, &self.params).unwrap();
        evaluate(&out.matches, &self.gt, self.params.d_s).unwrap().auc
    }
}

struct Run {
    curve: Vec<f64>,
    aborted: Option<String>,
}

impl Run {
    fn final_auc(&self) -> f64 {
        self.curve.last().copied().unwrap_or(f64::NAN)
    }

    /// Epochs until the curve first reaches 95% of its own final value.
    fn epochs_to_95(&self) -> usize {
        if self.aborted.is_some() {
            return usize::MAX;
        }
        let target = 0.95 * self.final_auc();
        self.curve.iter().position(|&a| a >= target).map_or(usize::MAX, |i| i + 1)
    }
}

fn arch() -> ArchConfig {
    ArchConfig {
        channels: [4, 8, 16],
        disc_hidden: 64,
        ..ArchConfig::default()
    }
}

fn train_curve(scene: &Scene, mode: TrainMode, seed: u64, iters_per_epoch: usize) -> Run {
    let images: Vec<Vec<f64>> = scene.clean[..scene.ds.reference_frames].iter().map(normalize_image).collect();
    let cfg = TrainConfig {
        mode,
        learning_rate: LEARNING_RATE,
        rotation_augment: ROTATION_AUGMENT,
        seed,
        ..TrainConfig::default()
    };
    let model = BiGanModel::<f64>::new(&arch(), mode.head(), seed).unwrap();
    let mut tr = Trainer::new(model, &images, cfg).unwrap();
    let mut curve = Vec::with_capacity(EPOCHS);
    for _ in 0..EPOCHS {
        if let Err(e) = tr.run(iters_per_epoch) {
            return Run {
                curve,
                aborted: Some(e.to_string()),
            };
        }
        let f = learned_features(tr.model(), &scene.rotated).unwrap();
        curve.push(scene.auc_of(&f, Metric::SquaredEuclidean).unwrap_or(f64::NAN));
    }
    Run { curve, aborted: None }
}

fn fmt_auc(a: Option<f64>) -> String {
    a.map_or("undefined".into(), |a| format!("{a:.4}"))
}

fn end_to_end() -> (Outcome, Outcome) {
    let start = Instant::now();
    let ds = generate_dataset(&SyntheticSpec::default()).unwrap();
    let spec = MapSpec::default();
    let clean = build_maps(&ds, &spec, &PerturbSpec::none()).unwrap();
    let rotated = build_maps(&ds, &spec, &PerturbSpec::new(0.0, 2.0, 3).unwrap()).unwrap();
    let scene = Scene {
        gt: ground_truth(&ds, 10.0).unwrap(),
        params: SeqParams::default(),
        ds,
        clean,
        rotated,
    };
    let iters_per_epoch = scene.ds.reference_frames.div_ceil(TrainConfig::default().batch_size);

    let sad_clean = sad_features::<f64>(&scene.clean, SAD_DOWN).unwrap();
    let out = match_features(&sad_clean, scene.ds.reference_frames, Metric::Sad, &scene.params).unwrap();
    let clean_eval = evaluate(&out.matches, &scene.gt, scene.params.d_s).unwrap();
    let sad_rotated = sad_features::<f64>(&scene.rotated, SAD_DOWN).unwrap();
    let sad_auc = scene.auc_of(&sad_rotated, Metric::Sad);

    let stable: Vec<Run> = (0..SEEDS).map(|s| train_curve(&scene, TrainMode::StableAfl, s, iters_per_epoch)).collect();
    let secs = start.elapsed().as_secs_f64();
    let wins = stable
        .iter()
        .filter(|r| r.aborted.is_none() && sad_auc.is_some_and(|sad| r.final_auc() > sad))
        .count();
    let finals: Vec<String> = stable.iter().map(|r| format!("{:.4}", r.final_auc())).collect();
    let ten = outcome(
        clean_eval.recall_at_full_precision >= 0.9 && wins >= 2 && secs <= 1800.0,
        format!(
            "(a) SAD recall@100%P {:.3} on {} queries; (b) R2 AUC SAD {} vs Stable-AFL [{}] after {} iterations, {wins}/3 higher; {:.0}s",
            clean_eval.recall_at_full_precision,
            clean_eval.frames,
            fmt_auc(sad_auc),
            finals.join(", "),
            EPOCHS * iters_per_epoch,
            secs
        ),
    );

    let baseline: Vec<Run> = (0..SEEDS).map(|s| train_curve(&scene, TrainMode::Baseline, s, iters_per_epoch)).collect();
    let mut no_later = 0;
    let mut per_seed = Vec::new();
    for (seed, (s, b)) in stable.iter().zip(&baseline).enumerate() {
        let (es, eb) = (s.epochs_to_95(), b.epochs_to_95());
        if es <= eb {
            no_later += 1;
        }
        let show = |e: usize, r: &Run| match &r.aborted {
            Some(_) => format!("aborted after {}", r.curve.len()),
            None if e == usize::MAX => "never".to_string(),
            None => e.to_string(),
        };
        per_seed.push(format!("seed {seed}: {} vs {}", show(es, s), show(eb, b)));
    }
    let stable_aborts = stable.iter().filter(|r| r.aborted.is_some()).count();
    let eleven = outcome(
        no_later >= 2 && stable_aborts == 0,
        format!(
            "epochs to 95% of final AUC, Stable-AFL vs baseline: {}; {no_later}/3 no later; {stable_aborts} Stable-AFL aborts, {} baseline aborts",
            per_seed.join(", "),
            baseline.iter().filter(|r| r.aborted.is_some()).count()
        ),
    );
    (ten, eleven)
}

fn main() -> ExitCode {
    let quick: [(&str, fn() -> Outcome); 9] = [
        ("1 divergence identity", divergence_identity),
        ("2 parallel-line triple", parallel_lines),
        ("3 gradient check", gradients),
        ("4 weight clipping", clipping),
        ("5 matcher oracle", matcher_oracle),
        ("6 enhancement moments", enhancement_moments),
        ("7 projection oracle", projection_oracle),
        ("8 storage accounting", storage),
        ("9 metrics oracles", metrics_oracles),
    ];
    let mut failed = 0;
    let mut report = |name: &str, o: Outcome| {
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    for (name, f) in quick {
        report(name, f());
    }
    let (ten, eleven) = end_to_end();
    report("10 end-to-end trend", ten);
    report("11 training stability", eleven);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
