use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use super::config::RunConfig;
use super::report::{accuracy_table, baseline_table, confusion_table, loss_table, render_table, sci, write_json, write_metrics};
use super::{Cli, Command, TransferOp};
use crate::autoencoders::{fit_detector, fit_extractor, ExtractorSpec, ModelBundle, ModelKind};
use crate::nn::gradcheck::{layer_kind_suite, GradcheckOptions, TOLERANCE};
use crate::par::{try_map_slice, with_jobs};
use crate::pipeline::{
    classify_rows, evaluate, extract_features, fit_calibrated, insert_samples, labels_of, normal_test_loss, run_baseline_on,
    run_modular_on, run_transfer_experiment, ExperimentResult, Thresholds,
};
use crate::sim::csv::{load_csv, write_csv};
use crate::sim::{compose_subset, make_dataset, new_product, series_of, Label, LabeledSample, SubsetKind};
use crate::transfer::{
    compose_training_set, export_db, export_string, import_db, select_characteristic, task_similarity, RepresentationDb,
    RepresentationRecord,
};
use crate::{Error, Result};

/// Fault multiplier for `gradcheck --inject-fault`.
pub const INJECTED_FAULT: f64 = 1.001;

/// Data files written by `gen-data`, without extension.
pub const DATA_PARTS: [&str; 6] = ["extractor_train", "normal", "anomalous", "test", "new_train", "new_test"];

pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    for s in &cli.set {
        cfg.apply_override(s)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one parsed command. `Ok(false)` means the command ran but its check
/// failed (gradcheck).
pub fn execute(cli: &Cli) -> Result<bool> {
    let cfg = effective_config(cli)?;
    let jobs = cfg.jobs;
    with_jobs(jobs, || dispatch(cli, &cfg))
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<bool> {
    let started = Instant::now();
    let (name, body) = match &cli.command {
        Command::Config { keys } => {
            if *keys {
                let rows: Vec<Vec<String>> = super::config::KEYS.iter().map(|(k, d)| vec![k.to_string(), d.to_string()]).collect();
                print!("{}", render_table(&["key", "meaning"], &rows));
            } else {
                print!("{}", cfg.to_text());
            }
            return Ok(true);
        }
        Command::GenData => ("gen-data".to_string(), gen_data(cfg)?),
        Command::TrainExtractor { sweep: false } => ("train-extractor".into(), train_extractor(cfg)?),
        Command::TrainExtractor { sweep: true } => ("extractor-sweep".into(), extractor_sweep(cfg)?),
        Command::TrainDetector { subset, features } => {
            let subset = parse_subset(subset.as_deref(), cfg.subset)?;
            ("train-detector".into(), train_detector(cfg, subset, features.as_deref())?)
        }
        Command::Evaluate { sweep: false, test } => ("evaluate".into(), evaluate_cmd(cfg, test.as_deref())?),
        Command::Evaluate { sweep: true, .. } => ("evaluate-sweep".into(), evaluate_sweep(cfg)?),
        Command::Baseline { subset, layers } => ("baseline".into(), baseline(cfg, subset.as_deref(), layers)?),
        Command::Gradcheck { configs, inject_fault } => {
            let (body, passed) = gradcheck(cfg, *configs, *inject_fault)?;
            finish(cfg, "gradcheck", body, started)?;
            return Ok(passed);
        }
        Command::Transfer { op } => transfer(cfg, op)?,
    };
    finish(cfg, &name, body, started)?;
    Ok(true)
}

fn finish(cfg: &RunConfig, name: &str, body: Value, started: Instant) -> Result<()> {
    let doc = json!({ "command": name, "config": cfg.echo(), "result": body });
    let path = write_metrics(&cfg.metrics_dir(), name, &doc, started.elapsed())?;
    eprintln!("metrics: {}", path.display());
    Ok(())
}

fn parse_subset(flag: Option<&str>, default: SubsetKind) -> Result<SubsetKind> {
    flag.map_or(Ok(default), str::parse)
}

fn part_path(cfg: &RunConfig, part: &str) -> PathBuf {
    cfg.data_dir().join(format!("{part}.csv"))
}

fn load_part(cfg: &RunConfig, part: &str) -> Result<Vec<LabeledSample>> {
    load_csv(&part_path(cfg, part))
}

fn training_subset(cfg: &RunConfig, kind: SubsetKind) -> Result<Vec<LabeledSample>> {
    let normal = load_part(cfg, "normal")?;
    let anomalous = if kind == SubsetKind::Mixed { load_part(cfg, "anomalous")? } else { vec![] };
    Ok(compose_subset(kind, &normal, &anomalous))
}

fn load_extractor(cfg: &RunConfig) -> Result<ModelBundle> {
    let b = ModelBundle::load(&cfg.extractor_path())?;
    if b.header.kind != ModelKind::Extractor {
        return Err(Error::config(format!("{} is not an extractor bundle", cfg.extractor_path().display())));
    }
    Ok(b)
}

fn load_db(cfg: &RunConfig) -> Result<RepresentationDb> {
    let p = cfg.db_path();
    if p.exists() {
        import_db(&p)
    } else {
        Ok(RepresentationDb::new())
    }
}

fn save_db(cfg: &RunConfig, db: &RepresentationDb) -> Result<()> {
    export_db(db, &cfg.db_path())
}

fn result_json(r: &ExperimentResult) -> Value {
    json!({
        "accuracy": r.metrics.accuracy,
        "confusion": r.metrics.confusion,
        "recall": r.metrics.recall(),
        "total": r.metrics.total,
        "thresholds": r.thresholds,
        "detector_loss_trace": r.loss_trace(),
    })
}

fn gen_data(cfg: &RunConfig) -> Result<Value> {
    let mode = cfg.exec_mode();
    let spec = cfg.dataset_spec();
    let split = make_dataset(&spec, mode)?;
    let fresh = new_product(&spec, cfg.new_product_samples, mode)?;
    let parts: [(&str, &[LabeledSample]); 6] = [
        ("extractor_train", &split.extractor_train),
        ("normal", &split.normal),
        ("anomalous", &split.anomalous),
        ("test", &split.test),
        ("new_train", &fresh.train),
        ("new_test", &fresh.test),
    ];
    let mut counts = serde_json::Map::new();
    for (name, samples) in parts {
        write_csv(&part_path(cfg, name), samples)?;
        counts.insert(name.into(), samples.len().into());
        println!("{name:<16} {:>6} events", samples.len());
    }
    let ids = |ps: &[crate::sim::ProductProfile]| ps.iter().map(|p| p.product_id.clone()).collect::<Vec<_>>();
    let manifest = json!({
        "seed": cfg.seed,
        "length": spec.event.length,
        "files": counts,
        "train_products": ids(&split.train_products),
        "test_products": ids(&split.test_products),
        "new_product": { "id": fresh.profile.product_id, "parent": fresh.parent },
        "test_counts": spec.test_counts(),
    });
    write_json(&cfg.data_dir().join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn sweep_spec(cfg: &RunConfig, architecture: crate::autoencoders::Architecture, code_size: usize) -> ExtractorSpec {
    ExtractorSpec {
        architecture,
        code_size,
        ..cfg.extractor_spec()
    }
}

fn train_extractor(cfg: &RunConfig) -> Result<Value> {
    let rows = load_part(cfg, "extractor_train")?;
    let test = load_part(cfg, "test")?;
    let spec = cfg.extractor_spec();
    let bundle = fit_extractor(&spec, &series_of(&rows), &cfg.extractor_train_config())?;
    bundle.save(&cfg.extractor_path())?;
    let loss = normal_test_loss(&bundle, &test, cfg.exec_mode())?;
    print!("{}", loss_table(&[(spec.architecture, spec.code_size, loss)]));
    Ok(json!({
        "architecture": spec.architecture,
        "code_size": spec.code_size,
        "test_loss": loss,
        "loss_trace": bundle.header.loss_trace,
        "bundle": cfg.extractor_path(),
    }))
}

fn sweep_jobs(cfg: &RunConfig) -> Vec<(crate::autoencoders::Architecture, usize)> {
    cfg.sweep_architectures
        .iter()
        .flat_map(|&a| cfg.sweep_code_sizes.iter().map(move |&c| (a, c)))
        .collect()
}

fn sweep_bundle_path(cfg: &RunConfig, a: crate::autoencoders::Architecture, code: usize) -> PathBuf {
    cfg.out.join("sweep").join(format!("{}-{code}.bundle", a.name()))
}

fn extractor_sweep(cfg: &RunConfig) -> Result<Value> {
    let rows = load_part(cfg, "extractor_train")?;
    let test = load_part(cfg, "test")?;
    let mode = cfg.exec_mode();
    let jobs = sweep_jobs(cfg);
    let cells = try_map_slice(mode, &jobs, |&(a, code)| -> Result<_> {
        let bundle = fit_extractor(&sweep_spec(cfg, a, code), &series_of(&rows), &cfg.extractor_train_config())?;
        bundle.save(&sweep_bundle_path(cfg, a, code))?;
        let loss = normal_test_loss(&bundle, &test, mode)?;
        Ok((a, code, loss, bundle.header.loss_trace))
    })?;
    let table = loss_table(&cells.iter().map(|c| (c.0, c.1, c.2)).collect::<Vec<_>>());
    print!("{table}");
    super::report::write_text(&cfg.metrics_dir().join("extractor-sweep.txt"), &table)?;
    Ok(Value::Array(
        cells
            .into_iter()
            .map(|(a, code, loss, trace)| json!({ "architecture": a, "code_size": code, "test_loss": loss, "loss_trace": trace }))
            .collect(),
    ))
}

/// Vectors and labels of an exchange file, all tasks pooled.
fn exchange_rows(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<Label>)> {
    let db = import_db(path)?;
    let records: Vec<&RepresentationRecord> = db.records().collect();
    Ok((records.iter().map(|r| r.vector.clone()).collect(), records.iter().map(|r| r.label).collect()))
}

fn train_detector(cfg: &RunConfig, subset: SubsetKind, features: Option<&Path>) -> Result<Value> {
    let mode = cfg.exec_mode();
    let extractor = load_extractor(cfg)?;
    let (rows, labels, source) = match features {
        Some(p) => {
            let (rows, labels) = exchange_rows(p)?;
            (rows, labels, json!({ "features": p }))
        }
        None => {
            let train = training_subset(cfg, subset)?;
            (extract_features(&extractor, &train, mode)?, labels_of(&train), json!({ "subset": subset.name() }))
        }
    };
    if let Some(r) = rows.first().filter(|r| r.len() != extractor.code_size()) {
        return Err(Error::config(format!(
            "training vectors have length {}, the extractor produces {}",
            r.len(),
            extractor.code_size()
        )));
    }
    let train = cfg.detector_train_config();
    let (detector, t) = fit_calibrated(&rows, &labels, |r| fit_detector(r, &train), &cfg.thresholds, mode)?;
    detector.save(&cfg.detector_path())?;
    write_json(&cfg.thresholds_path(), &t)?;
    println!("tau {}  tau_def {}  ({} training vectors)", sci(t.tau), sci(t.tau_def), rows.len());
    Ok(json!({
        "source": source,
        "training_vectors": rows.len(),
        "thresholds": t,
        "loss_trace": detector.header.loss_trace,
    }))
}

fn evaluate_cmd(cfg: &RunConfig, test: Option<&Path>) -> Result<Value> {
    let mode = cfg.exec_mode();
    let extractor = load_extractor(cfg)?;
    let detector = ModelBundle::load(&cfg.detector_path())?;
    if detector.input_width() != extractor.code_size() {
        return Err(Error::config(format!(
            "detector expects {} features, extractor produces {}",
            detector.input_width(),
            extractor.code_size()
        )));
    }
    let tp = cfg.thresholds_path();
    let text = std::fs::read_to_string(&tp).map_err(|e| Error::path(&tp, e))?;
    let t: Thresholds = serde_json::from_str(&text)?;
    let samples = match test {
        Some(p) => load_csv(p)?,
        None => load_part(cfg, "test")?,
    };
    let rows = extract_features(&extractor, &samples, mode)?;
    let verdicts = classify_rows(&detector, &t, &rows, mode)?;
    let predicted: Vec<Label> = verdicts.iter().map(|v| v.label).collect();
    let m = evaluate(&predicted, &labels_of(&samples))?;
    print!("{}", confusion_table(&m));
    Ok(json!({
        "accuracy": m.accuracy,
        "confusion": m.confusion,
        "recall": m.recall(),
        "total": m.total,
        "thresholds": t,
    }))
}

fn evaluate_sweep(cfg: &RunConfig) -> Result<Value> {
    let mode = cfg.exec_mode();
    let rows = load_part(cfg, "extractor_train")?;
    let test = load_part(cfg, "test")?;
    let normal = load_part(cfg, "normal")?;
    let anomalous = load_part(cfg, "anomalous")?;
    let det = cfg.detector_train_config();
    let jobs = sweep_jobs(cfg);
    let results = try_map_slice(mode, &jobs, |&(a, code)| -> Result<_> {
        let extractor = fit_extractor(&sweep_spec(cfg, a, code), &series_of(&rows), &cfg.extractor_train_config())?;
        let loss = normal_test_loss(&extractor, &test, mode)?;
        let mut per_subset = vec![];
        for subset in SubsetKind::ALL {
            let train = compose_subset(subset, &normal, &anomalous);
            per_subset.push((subset, run_modular_on(&extractor, &train, &test, &det, &cfg.thresholds, mode)?));
        }
        Ok((a, code, loss, per_subset))
    })?;
    let mut losses = vec![];
    let mut cells = vec![];
    let mut out = vec![];
    for (a, code, loss, per_subset) in &results {
        losses.push((*a, *code, *loss));
        for (s, r) in per_subset {
            cells.push((*a, *code, *s, r.metrics.accuracy));
            let mut v = result_json(r);
            v["architecture"] = json!(a);
            v["code_size"] = json!(code);
            v["subset"] = json!(s.name());
            v["extractor_test_loss"] = json!(loss);
            out.push(v);
        }
    }
    let mut archs = cfg.sweep_architectures.clone();
    archs.dedup();
    let text = format!("{}\n{}", loss_table(&losses), accuracy_table(&archs, &cells));
    print!("{text}");
    super::report::write_text(&cfg.metrics_dir().join("evaluate-sweep.txt"), &text)?;
    Ok(Value::Array(out))
}

fn baseline(cfg: &RunConfig, subset: Option<&str>, layers: &[usize]) -> Result<Value> {
    let mode = cfg.exec_mode();
    let layers = if layers.is_empty() { cfg.baseline_layers.clone() } else { layers.to_vec() };
    if layers.iter().any(|&l| !(1..=3).contains(&l)) {
        return Err(Error::config("baseline depths must lie in 1..=3"));
    }
    let subsets = match subset {
        Some(s) => vec![s.parse::<SubsetKind>()?],
        None => vec![SubsetKind::Normal, SubsetKind::NormalX5],
    };
    let test = load_part(cfg, "test")?;
    let normal = load_part(cfg, "normal")?;
    let det = cfg.detector_train_config();
    let jobs: Vec<(usize, SubsetKind)> = layers.iter().flat_map(|&l| subsets.iter().map(move |&s| (l, s))).collect();
    let results = try_map_slice(mode, &jobs, |&(l, s)| {
        run_baseline_on(l, &compose_subset(s, &normal, &[]), &test, &det, &cfg.thresholds, mode)
    })?;
    let cells: Vec<(usize, SubsetKind, f64)> = jobs.iter().zip(&results).map(|(j, r)| (j.0, j.1, r.metrics.accuracy)).collect();
    print!("{}", baseline_table(&cells));
    Ok(Value::Array(
        jobs.iter()
            .zip(&results)
            .map(|((l, s), r)| {
                let mut v = result_json(r);
                v["layers"] = json!(l);
                v["subset"] = json!(s.name());
                v
            })
            .collect(),
    ))
}

fn gradcheck(cfg: &RunConfig, configs: usize, inject_fault: bool) -> Result<(Value, bool)> {
    let opts = GradcheckOptions {
        fault_scale: if inject_fault { INJECTED_FAULT } else { 1.0 },
        ..GradcheckOptions::default()
    };
    let reports = layer_kind_suite(configs, crate::RngSeed(cfg.seed), opts)?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.kind.name().to_string(),
                r.configs.to_string(),
                sci(r.max_rel_error),
                if r.passed { "PASS" } else { "FAIL" }.to_string(),
            ]
        })
        .collect();
    print!("{}", render_table(&["layer", "configs", "max rel error", "result"], &rows));
    let passed = reports.iter().all(|r| r.passed);
    if !passed {
        eprintln!("gradient check failed (tolerance {})", sci(TOLERANCE));
    }
    Ok((json!({ "tolerance": TOLERANCE, "inject_fault": inject_fault, "passed": passed, "kinds": reports }), passed))
}

fn transfer(cfg: &RunConfig, op: &TransferOp) -> Result<(String, Value)> {
    let mode = cfg.exec_mode();
    let body = match op {
        TransferOp::Insert { samples } => {
            let extractor = load_extractor(cfg)?;
            let mut db = load_db(cfg)?;
            let samples = load_csv(samples)?;
            insert_samples(&mut db, &extractor, &samples, &cfg.sensor, mode)?;
            save_db(cfg, &db)?;
            println!("inserted {} records; {} tasks, {} records stored", samples.len(), db.task_count(), db.record_count());
            json!({ "inserted": samples.len(), "tasks": task_counts(&db) })
        }
        TransferOp::Retain { task, budget } => {
            let budget = budget.unwrap_or(cfg.budget);
            if budget == 0 {
                return Err(Error::config("retention needs a budget of at least 1 (--budget or transfer.budget)"));
            }
            let mut db = load_db(cfg)?;
            let ids: Vec<String> = match task {
                Some(t) => {
                    db.task(t)?;
                    vec![t.clone()]
                }
                None => db.task_ids().map(str::to_string).collect(),
            };
            let mut rows = vec![];
            let mut out = vec![];
            for id in ids {
                let before = db.task(&id)?.records.len();
                select_characteristic(&mut db, &id, budget)?;
                let after = db.task(&id)?.records.len();
                rows.push(vec![id.clone(), before.to_string(), after.to_string()]);
                out.push(json!({ "task": id, "before": before, "after": after }));
            }
            save_db(cfg, &db)?;
            print!("{}", render_table(&["task", "before", "after"], &rows));
            json!({ "budget": budget, "tasks": out })
        }
        TransferOp::Similar { task } => {
            let db = load_db(cfg)?;
            let width = db.task(task)?.code_size;
            let mut ranked = vec![];
            for (id, t) in db.tasks() {
                if id != task && t.code_size == width && !t.records.is_empty() {
                    ranked.push((id.to_string(), task_similarity(&db, task, id)?));
                }
            }
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let rows: Vec<Vec<String>> = ranked.iter().map(|(id, s)| vec![id.clone(), format!("{s:.6}")]).collect();
            print!("{}", render_table(&["task", "cosine similarity"], &rows));
            let list: Vec<Value> = ranked.iter().map(|(id, s)| json!({ "task": id, "similarity": s })).collect();
            return Ok((format!("similar-{task}"), json!({ "task": task, "ranking": list })));
        }
        TransferOp::Compose { task, new, output } => compose(cfg, task, new, output)?,
        TransferOp::Export { to } => {
            let db = load_db(cfg)?;
            export_db(&db, to)?;
            println!("exported {} records of {} tasks to {}", db.record_count(), db.task_count(), to.display());
            json!({ "to": to, "tasks": task_counts(&db) })
        }
        TransferOp::Import { from } => {
            let incoming = import_db(from)?;
            let mut db = load_db(cfg)?;
            let n = incoming.record_count();
            for r in incoming.records() {
                db.insert(r.clone())?;
            }
            save_db(cfg, &db)?;
            println!("imported {n} records; {} tasks, {} records stored", db.task_count(), db.record_count());
            json!({ "from": from, "imported": n, "tasks": task_counts(&db) })
        }
        TransferOp::Evaluate => transfer_evaluate(cfg)?,
    };
    let name = match op {
        TransferOp::Insert { .. } => "transfer-insert",
        TransferOp::Retain { .. } => "transfer-retain",
        TransferOp::Similar { .. } => unreachable!(),
        TransferOp::Compose { .. } => "transfer-compose",
        TransferOp::Export { .. } => "transfer-export",
        TransferOp::Import { .. } => "transfer-import",
        TransferOp::Evaluate => "transfer-evaluate",
    };
    Ok((name.to_string(), body))
}

fn task_counts(db: &RepresentationDb) -> Value {
    db.tasks().map(|(id, t)| (id.to_string(), Value::from(t.records.len()))).collect::<serde_json::Map<_, _>>().into()
}

fn compose(cfg: &RunConfig, task: &str, new: &Path, output: &Path) -> Result<Value> {
    let extractor = load_extractor(cfg)?;
    let db = load_db(cfg)?;
    let samples: Vec<LabeledSample> = load_csv(new)?.into_iter().filter(|s| s.label == Label::Normal).collect();
    if samples.is_empty() {
        return Err(Error::invalid(format!("{} holds no normal events", new.display())));
    }
    let vectors = extract_features(&extractor, &samples, cfg.exec_mode())?;
    let c = compose_training_set(&db, task, &vectors, &cfg.policy, crate::RngSeed(cfg.seed))?;
    let mut set = RepresentationDb::new();
    for (s, v) in samples.iter().zip(&c.vectors) {
        set.insert(RepresentationRecord {
            task_id: task.to_string(),
            label: Label::Normal,
            sensor: cfg.sensor.clone(),
            timestamp: s.timestamp,
            vector: v.clone(),
        })?;
    }
    for r in &c.borrowed_records {
        set.insert(r.clone())?;
    }
    crate::cli::report::write_text(output, &export_string(&set)?)?;
    let donors: Vec<Value> = c.donors.iter().map(|(id, s)| json!({ "task": id, "similarity": s })).collect();
    println!(
        "{} new + {} borrowed (requested {}, shortfall {}) -> {}",
        c.new_count,
        c.borrowed,
        c.requested,
        c.shortfall(),
        output.display()
    );
    Ok(json!({
        "task": task,
        "new": c.new_count,
        "borrowed": c.borrowed,
        "requested": c.requested,
        "shortfall": c.shortfall(),
        "donors": donors,
        "output": output,
    }))
}

fn transfer_evaluate(cfg: &RunConfig) -> Result<Value> {
    let mode = cfg.exec_mode();
    let extractor = load_extractor(cfg)?;
    let db = load_db(cfg)?;
    let train = load_part(cfg, "new_train")?;
    let test = load_part(cfg, "new_test")?;
    let task = train
        .first()
        .map(|s| s.product_id.clone())
        .ok_or_else(|| Error::invalid("new_train.csv is empty"))?;
    let out = run_transfer_experiment(
        &extractor,
        db,
        &task,
        &train,
        &test,
        &cfg.transfer_config(),
        &cfg.detector_train_config(),
        &cfg.thresholds,
        mode,
    )?;
    let rows = vec![
        vec!["alone".to_string(), train.len().to_string(), super::report::acc(out.alone.metrics.accuracy)],
        vec![
            "composed".to_string(),
            (train.len() + out.borrowed).to_string(),
            super::report::acc(out.composed.metrics.accuracy),
        ],
    ];
    print!("{}", render_table(&["detector", "training vectors", "accuracy"], &rows));
    let donors: Vec<Value> = out.donors.iter().map(|(id, s)| json!({ "task": id, "similarity": s })).collect();
    Ok(json!({
        "task": task,
        "alone": result_json(&out.alone),
        "composed": result_json(&out.composed),
        "borrowed": out.borrowed,
        "requested": out.requested,
        "donors": donors,
    }))
}
