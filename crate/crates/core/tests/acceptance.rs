//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 4–8 run the committed desk configuration (`configs/desk.conf`)
//! over seeds 1, 2 and 3. The whole suite takes tens of minutes on one core.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use modad::autoencoders::{fit_extractor, Architecture, BaselineSpec, DetectorSpec, ExtractorSpec, ModelBundle, PAPER_CODE_SIZES};
use modad::cli::RunConfig;
use modad::nn::gradcheck::{layer_kind_suite, GradcheckOptions, LayerKind, TOLERANCE};
use modad::nn::{AdamConfig, AdamState, Param};
use modad::pipeline::{build_feature_db, extractor_test_loss, run_baseline_experiment, run_modular_on, run_transfer_experiment};
use modad::sim::{make_dataset, new_product, series_of, DatasetSplit, Label, SubsetKind};
use modad::transfer::{
    compose_training_set, export_string, farthest_point, import_str, spread, MixPolicy, RepresentationDb, RepresentationRecord,
};
use modad::RngSeed;
use rand::Rng;

const SEEDS: [u64; 3] = [1, 2, 3];

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn desk_config(seed: u64) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.conf");
    let mut cfg = RunConfig::load(&path).expect("desk config parses");
    cfg.seed = seed;
    cfg.validate().expect("desk config is valid");
    cfg
}

/// Criteria selected by `MODAD_ACCEPTANCE_ONLY` (comma-separated ids); all by default.
fn selected() -> Vec<usize> {
    match std::env::var("MODAD_ACCEPTANCE_ONLY") {
        Ok(v) if !v.trim().is_empty() => v.split(',').map(|x| x.trim().parse().expect("criterion id")).collect(),
        _ => (1..=10).collect(),
    }
}

fn main() {
    let started = Instant::now();
    let only = selected();
    let want = |id: usize| only.contains(&id);
    let mut results = vec![];
    if want(1) {
        results.push(c1_gradients());
    }
    if want(2) {
        results.push(c2_adam());
    }
    if want(3) {
        results.push(c3_convergence());
    }
    if (4..=8).any(want) {
        results.extend(seeded_criteria().into_iter().filter(|o| want(o.id)));
    }
    if want(9) {
        results.push(c9_transfer_mechanics());
    }
    if want(10) {
        results.push(c10_determinism());
    }

    println!("\nacceptance summary ({:.0} s)", started.elapsed().as_secs_f64());
    for o in &results {
        println!("C{:<2} {} {}: {}", o.id, if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    for id in (1..=10).filter(|i| !want(*i)) {
        println!("C{id:<2} SKIP not selected by MODAD_ACCEPTANCE_ONLY");
    }
    if results.iter().any(|o| !o.passed) {
        std::process::exit(1);
    }
}

fn c1_gradients() -> Outcome {
    let t = Instant::now();
    let reports = layer_kind_suite(10, RngSeed(1), GradcheckOptions::default()).expect("gradcheck runs");
    let secs = t.elapsed().as_secs_f64();
    let kinds: Vec<LayerKind> = reports.iter().map(|r| r.kind).collect();
    let covered = LayerKind::ALL.iter().all(|k| kinds.iter().filter(|x| *x == k).count() == 1) && kinds.len() == LayerKind::ALL.len();
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    for r in &reports {
        println!("  [C1] {:<18} {} configs  max rel error {:.3e}", r.kind.name(), r.configs, r.max_rel_error);
    }
    Outcome {
        id: 1,
        name: "gradient integrity",
        passed: covered && reports.iter().all(|r| r.passed && r.configs == 10) && secs < 60.0,
        detail: format!("{} kinds x 10 configs, worst rel error {worst:.3e} (tol {TOLERANCE:e}), {secs:.1} s", reports.len()),
    }
}

fn c2_adam() -> Outcome {
    // Reference iterates from a separate scripted recurrence.
    const FROZEN: [(usize, f64); 5] = [
        (1, 0.09999999983333335),
        (2, 0.19989729258521102),
        (5, 0.4982205437727129),
        (10, 0.9858115903830454),
        (20, 1.88063952089601),
    ];
    let mut p = Param::zeros(&[1]);
    let mut s = AdamState::new(AdamConfig::with_learning_rate(0.1), [&p]);
    let mut iterates = vec![];
    let mut reached = None;
    for step in 1..=500 {
        let x = p.value.data()[0];
        p.grad.data_mut()[0] = 2.0 * (x - 3.0);
        s.step(&mut [&mut p]).unwrap();
        let x = p.value.data()[0];
        iterates.push(x);
        if reached.is_none() && (x - 3.0).abs() <= 1e-3 {
            reached = Some(step);
        }
    }
    let final_gap = (iterates[499] - 3.0).abs();

    let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.1);
    let (mut x, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
    let mut script = vec![];
    for t in 1..=20 {
        let g = 2.0 * (x - 3.0);
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powi(t));
        let vh = v / (1.0 - b2.powi(t));
        x -= lr * mh / (vh.sqrt() + eps);
        script.push(x);
    }
    let script_err = iterates[..20].iter().zip(&script).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let frozen_err = FROZEN.iter().map(|(i, want)| (iterates[i - 1] - want).abs()).fold(0.0, f64::max);
    Outcome {
        id: 2,
        name: "optimizer oracle",
        passed: final_gap <= 1e-3 && script_err <= 1e-12 && frozen_err <= 1e-12,
        detail: format!(
            "|x-3| after 500 steps {final_gap:.2e} (first within 1e-3 at step {}), max deviation from scripted recurrence {script_err:.1e}, from frozen iterates {frozen_err:.1e}",
            reached.map_or("never".into(), |s| s.to_string())
        ),
    }
}

fn c3_convergence() -> Outcome {
    let mut cfg = desk_config(1);
    cfg.extractor.code_size = 16;
    // Adam's customary step size; the suite's tuned 3e-3 is specific to code 48.
    cfg.extractor_train.learning_rate = AdamConfig::default().learning_rate;
    let spec = cfg.dataset_spec();
    let split = make_dataset(&spec, cfg.exec_mode()).expect("dataset");
    let t = Instant::now();
    let mut ratios = vec![];
    for a in Architecture::ALL {
        let es = ExtractorSpec {
            architecture: a,
            ..cfg.extractor_spec()
        };
        let b = fit_extractor(&es, &series_of(&split.extractor_train), &cfg.extractor_train_config()).expect("extractor trains");
        let trace = &b.header.loss_trace;
        let ratio = trace[trace.len() - 1] / trace[0];
        println!("  [C3] {:<4} epoch1 {:.3e} epoch{} {:.3e} ratio {ratio:.4}", a.name(), trace[0], trace.len(), trace[trace.len() - 1]);
        ratios.push((a, trace.len(), ratio));
    }
    let secs = t.elapsed().as_secs_f64();
    let detail = ratios.iter().map(|(a, _, r)| format!("{} {r:.4}", a.name())).collect::<Vec<_>>().join(", ");
    Outcome {
        id: 3,
        name: "extractor convergence",
        passed: ratios.iter().all(|&(_, n, r)| n == 10 && r <= 0.1) && secs < 900.0,
        detail: format!("epoch10/epoch1 loss: {detail}; sweep {secs:.0} s (limit 900)"),
    }
}

struct SeedRun {
    seed: u64,
    cnn_loss: f64,
    fc_loss: f64,
    lstm_loss: Option<f64>,
    normal: f64,
    mixed: f64,
    normal_x5: f64,
    best_baseline: (usize, SubsetKind, f64),
    transfer_alone: f64,
    transfer_composed: f64,
}

fn train_arch(cfg: &RunConfig, split: &DatasetSplit, a: Architecture) -> (ModelBundle, f64) {
    let es = ExtractorSpec {
        architecture: a,
        ..cfg.extractor_spec()
    };
    let b = fit_extractor(&es, &series_of(&split.extractor_train), &cfg.extractor_train_config()).expect("extractor trains");
    let loss = extractor_test_loss(&b, split, cfg.exec_mode()).expect("test loss");
    (b, loss)
}

fn run_seed(seed: u64, need_lstm: bool) -> SeedRun {
    let cfg = desk_config(seed);
    let mode = cfg.exec_mode();
    let spec = cfg.dataset_spec();
    let split = make_dataset(&spec, mode).expect("dataset");
    let t = Instant::now();
    let (cnn, cnn_loss) = train_arch(&cfg, &split, Architecture::Cnn);
    let (_, fc_loss) = train_arch(&cfg, &split, Architecture::Fc);
    // The LSTM only matters when the CNN already beat the FC extractor.
    let lstm_loss = (need_lstm && cnn_loss <= fc_loss).then(|| train_arch(&cfg, &split, Architecture::Lstm).1);
    println!(
        "  [seed {seed}] test MSE at code {}: cnn {cnn_loss:.3e} fc {fc_loss:.3e} lstm {} ({:.0} s)",
        cfg.extractor.code_size,
        lstm_loss.map_or("skipped".into(), |l| format!("{l:.3e}")),
        t.elapsed().as_secs_f64()
    );

    let det = cfg.detector_train_config();
    let modular = |subset: SubsetKind| {
        run_modular_on(&cnn, &split.subset(subset), &split.test, &det, &cfg.thresholds, mode)
            .expect("modular experiment")
            .metrics
            .accuracy
    };
    let normal = modular(SubsetKind::Normal);
    let mixed = modular(SubsetKind::Mixed);
    let normal_x5 = modular(SubsetKind::NormalX5);
    println!("  [seed {seed}] modular accuracy: normal {normal:.4} mixed {mixed:.4} normal_x5 {normal_x5:.4}");

    let mut best_baseline = (0, SubsetKind::Normal, f64::NEG_INFINITY);
    for layers in 1..=3 {
        for subset in [SubsetKind::Normal, SubsetKind::NormalX5] {
            let acc = run_baseline_experiment(layers, subset, &split, &det, &cfg.thresholds, mode)
                .expect("baseline")
                .metrics
                .accuracy;
            println!("  [seed {seed}] baseline {layers} layer(s) {:<9} accuracy {acc:.4}", subset.name());
            if acc > best_baseline.2 {
                best_baseline = (layers, subset, acc);
            }
        }
    }

    let fresh = new_product(&spec, cfg.new_product_samples, mode).expect("new product");
    let db = build_feature_db(&cnn, &split.normal, &cfg.sensor, mode).expect("feature db");
    let out = run_transfer_experiment(
        &cnn,
        db,
        &fresh.profile.product_id,
        &fresh.train,
        &fresh.test,
        &cfg.transfer_config(),
        &det,
        &cfg.thresholds,
        mode,
    )
    .expect("transfer experiment");
    println!(
        "  [seed {seed}] transfer {} (variant of {}): alone {:.4} composed {:.4} ({} borrowed from {:?})",
        fresh.profile.product_id,
        fresh.parent,
        out.alone.metrics.accuracy,
        out.composed.metrics.accuracy,
        out.borrowed,
        out.donors.iter().map(|d| &d.0).collect::<Vec<_>>()
    );
    SeedRun {
        seed,
        cnn_loss,
        fc_loss,
        lstm_loss,
        normal,
        mixed,
        normal_x5,
        best_baseline,
        transfer_alone: out.alone.metrics.accuracy,
        transfer_composed: out.composed.metrics.accuracy,
    }
}

fn seeded_criteria() -> Vec<Outcome> {
    let mut runs: Vec<SeedRun> = vec![];
    for seed in SEEDS {
        let c4_wins = runs.iter().filter(|r| c4_win(r)).count();
        runs.push(run_seed(seed, c4_wins < 2));
    }
    let per_seed = |f: &dyn Fn(&SeedRun) -> String| runs.iter().map(|r| format!("s{} {}", r.seed, f(r))).collect::<Vec<_>>().join(", ");
    let count = |f: &dyn Fn(&SeedRun) -> bool| runs.iter().filter(|r| f(r)).count();

    let c4 = count(&c4_win);
    let c5 = count(&|r| r.normal >= 0.90);
    let c6 = count(&|r| r.normal >= r.mixed);
    // Best modular cell against the best baseline cell, both over the
    // Normal and Normal*5 subsets the baselines are trained on.
    let best_modular = |r: &SeedRun| r.normal.max(r.normal_x5);
    let c7_acc = count(&|r| best_modular(r) >= r.best_baseline.2 - 0.02);
    let ratios: Vec<f64> = PAPER_CODE_SIZES
        .iter()
        .map(|&c| DetectorSpec::new(c).unwrap().param_count() as f64 / BaselineSpec::new(2, 3000).unwrap().param_count() as f64)
        .collect();
    let worst_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let c8 = count(&|r| r.transfer_composed >= r.transfer_alone);
    vec![
        Outcome {
            id: 4,
            name: "architecture ordering",
            passed: c4 >= 2,
            detail: format!(
                "CNN best in {c4}/3 seeds (need 2); {}",
                per_seed(&|r| format!(
                    "cnn {:.2e} fc {:.2e} lstm {}",
                    r.cnn_loss,
                    r.fc_loss,
                    r.lstm_loss.map_or("n/a".into(), |l| format!("{l:.2e}"))
                ))
            ),
        },
        Outcome {
            id: 5,
            name: "modular detection accuracy",
            passed: c5 >= 2,
            detail: format!("normal-trained accuracy >= 0.90 in {c5}/3 seeds (need 2); {}", per_seed(&|r| format!("{:.4}", r.normal))),
        },
        Outcome {
            id: 6,
            name: "subset effect",
            passed: c6 == 3,
            detail: format!(
                "Normal >= Mixed in {c6}/3 seeds (need 3); {}",
                per_seed(&|r| format!("{:.4} vs {:.4}", r.normal, r.mixed))
            ),
        },
        Outcome {
            id: 7,
            name: "modular vs conventional",
            passed: c7_acc == 3 && worst_ratio < 0.05,
            detail: format!(
                "best modular >= best baseline - 0.02 in {c7_acc}/3 seeds (need 3); {}; detector/2-layer baseline parameters at paper widths {}",
                per_seed(&|r| format!(
                    "{:.4} (normal {:.4}, normal_x5 {:.4}) vs {:.4} ({}L {})",
                    best_modular(r),
                    r.normal,
                    r.normal_x5,
                    r.best_baseline.2,
                    r.best_baseline.0,
                    r.best_baseline.1.name()
                )),
                ratios.iter().zip(PAPER_CODE_SIZES).map(|(r, c)| format!("code {c}: {:.4}%", r * 100.0)).collect::<Vec<_>>().join(" ")
            ),
        },
        Outcome {
            id: 8,
            name: "transfer benefit",
            passed: c8 >= 2,
            detail: format!(
                "composed >= alone in {c8}/3 seeds (need 2); {}",
                per_seed(&|r| format!("{:.4} vs {:.4}", r.transfer_composed, r.transfer_alone))
            ),
        },
    ]
}

fn c4_win(r: &SeedRun) -> bool {
    r.cnn_loss <= r.fc_loss && r.lstm_loss.is_some_and(|l| r.cnn_loss <= l)
}

/// Largest minimum pairwise distance over all `budget`-subsets.
fn brute_force_spread(vectors: &[&[f64]], budget: usize) -> f64 {
    let n = vectors.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != budget {
            continue;
        }
        let subset: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        best = best.max(spread(vectors, &subset));
    }
    best
}

fn c9_transfer_mechanics() -> Outcome {
    let mut rng = RngSeed(9).rng();
    // Exhaustive over 1-D inputs on a small integer grid, plus random reals.
    let mut cases = 0;
    let mut mismatches = 0;
    let check = |pts: &[f64], cases: &mut usize, mismatches: &mut usize| {
        let owned: Vec<Vec<f64>> = pts.iter().map(|&x| vec![x]).collect();
        let refs: Vec<&[f64]> = owned.iter().map(Vec::as_slice).collect();
        for b in 1..=3.min(pts.len()) {
            *cases += 1;
            let got = farthest_point(&refs, b);
            let ok = got.len() == b && spread(&refs, &got) == brute_force_spread(&refs, b);
            if !ok {
                *mismatches += 1;
            }
        }
    };
    for n in 1..=5u32 {
        for code in 0..4u32.pow(n) {
            let pts: Vec<f64> = (0..n).map(|i| ((code / 4u32.pow(i)) % 4) as f64).collect();
            check(&pts, &mut cases, &mut mismatches);
        }
    }
    for _ in 0..20_000 {
        let n = rng.random_range(1..=6);
        let pts: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        check(&pts, &mut cases, &mut mismatches);
    }
    // Informational: greedy farthest-point is not optimal in the plane.
    let plane = [[0.0, 10.0], [-6.0, 0.0], [6.0, 0.0], [0.0, 0.0], [0.0, 0.1]];
    let prefs: Vec<&[f64]> = plane.iter().map(|p| p.as_slice()).collect();
    println!(
        "  [C9] note: 2-D counterexample, greedy spread {:.3} vs optimum {:.3} at budget 2",
        spread(&prefs, &farthest_point(&prefs, 2)),
        brute_force_spread(&prefs, 2)
    );

    // Export/import round trip on awkward values.
    let mut db = RepresentationDb::new();
    let awkward = [0.1, -0.0, 1e-310, f64::MAX, f64::MIN_POSITIVE, -1.0 / 3.0, 2.0f64.sqrt()];
    for i in 0..40 {
        let vector: Vec<f64> = (0..7).map(|j| if i % 3 == 0 { awkward[j] } else { rng.random_range(-1e3..1e3) }).collect();
        let label = [Label::Normal, Label::Anomalous, Label::Defect, Label::Unknown][i % 4];
        db.insert(RepresentationRecord {
            task_id: format!("task \"{}\"/é", i % 5),
            label,
            sensor: "pressure,raw".into(),
            timestamp: -(i as i64) * 1_000_000_007,
            vector,
        })
        .unwrap();
    }
    let text = export_string(&db).unwrap();
    let back = import_str(&text, Path::new("roundtrip")).unwrap();
    let bits = |d: &RepresentationDb| -> Vec<(String, Label, String, i64, Vec<u64>)> {
        d.records()
            .map(|r| (r.task_id.clone(), r.label, r.sensor.clone(), r.timestamp, r.vector.iter().map(|v| v.to_bits()).collect()))
            .collect()
    };
    let round_trip = bits(&db) == bits(&back) && export_string(&back).unwrap() == text;

    // Borrowed counts against exact rational arithmetic: r = p/q.
    let mut donors = RepresentationDb::new();
    for i in 0..2000 {
        donors
            .insert(RepresentationRecord {
                task_id: "donor".into(),
                label: Label::Normal,
                sensor: "pressure".into(),
                timestamp: i,
                vector: vec![1.0, i as f64 * 1e-3],
            })
            .unwrap();
    }
    let mut count_cases = 0;
    let mut count_bad = 0;
    for (p, q) in [(1u64, 10u64), (1, 4), (3, 10), (1, 3), (1, 2), (2, 3), (3, 4), (9, 10), (0, 1)] {
        for n in 1..=120u64 {
            let want = if p == 0 { 0 } else { (p * n).div_ceil(q - p) } as usize;
            let new: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0, 1.0 + i as f64]).collect();
            let policy = MixPolicy {
                k_tasks: 1,
                mix_ratio: p as f64 / q as f64,
            };
            let c = compose_training_set(&donors, "new", &new, &policy, RngSeed(n)).unwrap();
            count_cases += 1;
            if c.requested != want || c.borrowed != want || c.vectors.len() != n as usize + want {
                count_bad += 1;
            }
        }
    }
    Outcome {
        id: 9,
        name: "transfer mechanics",
        passed: mismatches == 0 && round_trip && count_bad == 0,
        detail: format!(
            "retention vs brute force: {mismatches} mismatches in {cases} 1-D cases (B <= 3); round trip {}; borrowed count: {count_bad} mismatches in {count_cases} cases",
            if round_trip { "record-exact" } else { "DIFFERS" }
        ),
    }
}

/// Runs the CLI pipeline in `dir` and returns every deterministic output file.
fn cli_pipeline(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let exe = env!("CARGO_BIN_EXE_modad");
    let small = [
        "data.length=60",
        "data.extractor_samples=150",
        "data.normal_samples=80",
        "data.mixed_samples=120",
        "data.test_samples=60",
        "data.new_product_samples=12",
        "extractor.code_size=6",
        "extractor.max_epochs=2",
        "detector.max_epochs=3",
        "transfer.budget=8",
        "sweep.code_sizes=6",
    ];
    let steps: &[&[&str]] = &[
        &["gen-data"],
        &["train-extractor"],
        &["train-extractor", "--sweep"],
        &["train-detector", "--subset", "mixed"],
        &["evaluate"],
        &["evaluate", "--sweep"],
        &["baseline", "--layers", "1"],
        &["gradcheck", "--configs", "1"],
        &["transfer", "insert", "--samples", "out/data/normal.csv"],
        &["transfer", "retain"],
        &["transfer", "similar", "--task", "P00"],
        &["transfer", "compose", "--task", "P12", "--new", "out/data/new_train.csv", "--output", "out/composed.jsonl"],
        &["train-detector", "--features", "out/composed.jsonl"],
        &["transfer", "export", "--to", "out/export.jsonl"],
        &["transfer", "import", "--from", "out/export.jsonl", "--set", "paths.db=out/imported.jsonl"],
        &["transfer", "evaluate"],
    ];
    for step in steps {
        let mut cmd = Command::new(exe);
        cmd.current_dir(dir).args(*step).args(["--seed", "4", "--out", "out"]);
        for s in small {
            cmd.args(["--set", s]);
        }
        let out = cmd.output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{step:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.join("out")];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let p = e.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.to_string_lossy().ends_with(".timing.json") {
                files.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(files)
}

fn c10_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (first, second) = match (cli_pipeline(a.path()), cli_pipeline(b.path())) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => {
            return Outcome {
                id: 10,
                name: "determinism",
                passed: false,
                detail: e,
            }
        }
    };
    let metrics = first.keys().filter(|p| p.starts_with("out/metrics")).count();
    let differing: Vec<String> = first
        .keys()
        .chain(second.keys())
        .filter(|k| first.get(*k) != second.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    Outcome {
        id: 10,
        name: "determinism",
        passed: differing.is_empty() && metrics >= 15,
        detail: format!(
            "two CLI runs of 16 steps: {} files compared ({metrics} metrics files), {} differ{}",
            first.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {differing:?}") }
        ),
    }
}
