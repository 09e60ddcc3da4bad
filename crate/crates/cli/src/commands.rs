use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use mosaic_core::data::{read_normalized, user_blocks, write_normalized, NORMALIZED_MAGIC};
use mosaic_core::eval::{evaluate, metrics_csv, per_user_csv, ranked_lists, MetricRow};
use mosaic_core::memory::{classify_all, d_hat_csv, write_reports, MemoryReport};
use mosaic_core::pipeline::{FilterMode, MosaicConfig};
use mosaic_core::synth::write_tsv;
use mosaic_core::trainer::{mean_block_loss, read_trajectories, sampled_triplet_loss, write_trajectories};
use mosaic_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::{read_split, write_split};

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn execution(cfg: &RunConfig) -> Execution {
    if cfg.run.deterministic {
        Execution::Sequential
    } else {
        Execution::best_available()
    }
}

/// Reads raw delimited text, or a normalized file written by `ingest`.
/// Returns the raw bytes too, for the split checksum.
pub fn load_interactions(path: &Path, cfg: &RunConfig) -> Result<(Vec<u8>, InteractionLog), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::read(path, e))?;
    let log = if bytes.starts_with(NORMALIZED_MAGIC) {
        read_normalized(bytes.as_slice())
    } else {
        parse_interactions(bytes.as_slice(), &cfg.data.schema())
    }
    .map_err(|e| CliError::read(path, e))?;
    Ok((bytes, log))
}

fn save_model(path: &Path, model: &LatentModel) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    model.write_checkpoint(&mut bytes)?;
    write_file(path, &bytes)
}

fn load_model(path: &Path) -> Result<LatentModel, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::read(path, e))?;
    LatentModel::read_checkpoint(BufReader::new(file)).map_err(|e| CliError::read(path, e))
}

fn save_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    write_trajectories(trajectories, &mut bytes)?;
    write_file(path, &bytes)
}

fn save_reports(dir: &Path, reports: &[MemoryReport]) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    write_reports(reports, &mut bytes)?;
    write_file(&dir.join("memory_reports.jsonl"), &bytes)?;
    write_file(&dir.join("d_hat.csv"), d_hat_csv(reports).as_bytes())
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

pub fn ingest(cfg: &RunConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let (_, log) = load_interactions(input, cfg)?;
    ensure_dir(out)?;
    let stats = dataset_stats(&log);
    write_file(&out.join("stats.csv"), stats.to_csv().as_bytes())?;
    let mut bytes = Vec::new();
    write_normalized(&log, &mut bytes)?;
    write_file(&out.join("interactions.bin"), &bytes)?;
    print!("{}", stats.to_csv());
    if log.skipped_rows() > 0 {
        eprintln!("skipped {} malformed rows", log.skipped_rows());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Algo {
    Snape,
    Bpr,
}

pub fn train(cfg: &RunConfig, algo: Algo, input: &Path, out: &Path) -> Result<(), CliError> {
    let (raw, log) = load_interactions(input, cfg)?;
    let split = temporal_split(&log, cfg.data.split_ratio)?;
    ensure_dir(out)?;
    write_split(out, &raw, &split)?;
    let train = &split.train;
    let t = &cfg.train;
    let init = LatentModel::init(train.n_users(), train.n_items(), t.dim_k, t.reg_lambda, t.seed);
    match algo {
        Algo::Snape => {
            let result = train_snape(train, t)?;
            save_model(&out.join("snape.ckpt"), &result.model)?;
            save_trajectories(&out.join("trajectories.jsonl"), &result.trajectories)?;
            let blocks = user_blocks(train);
            audit(mean_block_loss(&init, &blocks), mean_block_loss(&result.model, &blocks), "mean block loss");
        }
        Algo::Bpr => {
            let model = train_bpr(train, t, t.bpr_samples)?;
            save_model(&out.join("bpr.ckpt"), &model)?;
            let probe = |m: &LatentModel| sampled_triplet_loss(m, train, 10_000, t.seed ^ 0x5eed);
            audit(probe(&init), probe(&model), "sampled triplet loss");
        }
    }
    Ok(())
}

fn audit(before: Option<f64>, after: Option<f64>, what: &str) {
    match (before, after) {
        (Some(b), Some(a)) => println!(
            "loss audit: {what} {b:.6} -> {a:.6} ({})",
            if a < b { "decreased" } else { "did not decrease" }
        ),
        _ => println!("loss audit: {what} undefined (no training pairs)"),
    }
}

pub fn analyze(cfg: &RunConfig, trajectories: &Path, out: &Path) -> Result<(), CliError> {
    let file = fs::File::open(trajectories).map_err(|e| CliError::read(trajectories, e))?;
    let trajs = read_trajectories(BufReader::new(file)).map_err(|e| CliError::read(trajectories, e))?;
    if trajs.is_empty() {
        return Err(CliError::Input(format!("{}: no trajectories", trajectories.display())));
    }
    let reports = classify_all(&trajs, &cfg.memory, execution(cfg))?;
    ensure_dir(out)?;
    save_reports(out, &reports)?;
    print_verdicts(&reports);
    Ok(())
}

fn print_verdicts(reports: &[MemoryReport]) {
    let count = |v: Verdict| reports.iter().filter(|r| r.verdict == v).count();
    let lrd = count(Verdict::StationaryLRD);
    println!(
        "users {} non_stationary {} short_memory {} lrd {} too_short {} lrd_fraction {:.4}",
        reports.len(),
        count(Verdict::NonStationary),
        count(Verdict::StationaryShortMemory),
        lrd,
        count(Verdict::TooShort),
        lrd as f64 / reports.len() as f64
    );
}

#[derive(Serialize)]
struct Timings {
    stage1_seconds: f64,
    memory_seconds: f64,
    stage2_seconds: f64,
}

fn map_row(rows: &[MetricRow], k: usize) -> Option<f64> {
    rows.iter()
        .find(|r| r.metric == eval::Metric::Map && r.k == k)
        .map(|r| r.value)
}

pub fn pipeline(cfg: &RunConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let (raw, log) = load_interactions(input, cfg)?;
    let split = temporal_split(&log, cfg.data.split_ratio)?;
    ensure_dir(out)?;
    write_file(&out.join("config.toml"), cfg.to_toml().as_bytes())?;
    write_split(out, &raw, &split)?;
    let mcfg = MosaicConfig {
        train: cfg.train.clone(),
        memory: cfg.memory.clone(),
        filter: cfg.pipeline.filter,
        execution: execution(cfg),
    };
    let result = match run_mosaic(&split.train, &mcfg) {
        Ok(r) => r,
        Err(PipelineError::EmptyFilter(f)) => {
            save_model(&out.join("stage1.ckpt"), &f.stage1)?;
            save_trajectories(&out.join("trajectories.jsonl"), &f.trajectories)?;
            save_reports(out, &f.reports)?;
            let path = out.join("pipeline_report.json");
            write_file(&path, json(&f.report).as_bytes())?;
            print_verdicts(&f.reports);
            return Err(CliError::EmptyFilter(path.display().to_string()));
        }
        Err(e) => return Err(e.into()),
    };
    save_model(&out.join("stage1.ckpt"), &result.stage1)?;
    save_model(&out.join("stage2.ckpt"), &result.stage2)?;
    save_model(&out.join("scoring.ckpt"), &result.scoring)?;
    save_trajectories(&out.join("trajectories.jsonl"), &result.trajectories)?;
    save_reports(out, &result.reports)?;
    write_file(&out.join("pipeline_report.json"), json(&result.report).as_bytes())?;
    let t = &result.report.timings;
    let timings = Timings {
        stage1_seconds: t.stage1.as_secs_f64(),
        memory_seconds: t.memory.as_secs_f64(),
        stage2_seconds: t.stage2.as_secs_f64(),
    };
    write_file(&out.join("timings.json"), json(&timings).as_bytes())?;

    let exec = execution(cfg);
    let lists1 = ranked_lists(&result.stage1, &split.test, exec);
    let lists2 = ranked_lists(&result.scoring, &split.test, exec);
    let mut rows = evaluate("snape", &lists1, &cfg.eval.ks);
    let mosaic_rows = evaluate("mosaic", &lists2, &cfg.eval.ks);
    if let (Some(a), Some(b)) = (map_row(&rows, 5), map_row(&mosaic_rows, 5)) {
        println!("MAP@5 stage1 {a:.6} stage2 {b:.6} change {:+.6}", b - a);
    }
    rows.extend(mosaic_rows);
    write_file(&out.join("metrics.csv"), metrics_csv(&rows).as_bytes())?;
    if cfg.eval.per_user {
        write_file(&out.join("per_user_snape.csv"), per_user_csv(&lists1, &cfg.eval.ks).as_bytes())?;
        write_file(&out.join("per_user_mosaic.csv"), per_user_csv(&lists2, &cfg.eval.ks).as_bytes())?;
    }
    print_verdicts(&result.reports);
    if cfg.pipeline.filter == FilterMode::PassAll {
        let passed = result.stage1 == result.stage2;
        println!("stage equality audit: {}", if passed { "passed" } else { "FAILED" });
        if !passed {
            return Err(CliError::Numeric("pass-all stage 2 differs from stage 1".into()));
        }
    }
    Ok(())
}

pub fn evaluate_models(cfg: &RunConfig, split: &Path, checkpoints: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let loaded = read_split(split)?;
    let test = &loaded.test;
    println!(
        "split: {} users, {} test interactions (ratio {})",
        loaded.manifest.n_users, loaded.manifest.n_test, loaded.manifest.split_ratio
    );
    let mut rows = Vec::new();
    let mut per_user = Vec::new();
    for path in checkpoints {
        let model = load_model(path)?;
        if model.n_users() != test.n_users() || model.n_items() != test.n_items() {
            return Err(CliError::Input(format!(
                "{}: model has {} users / {} items, split has {} / {}",
                path.display(),
                model.n_users(),
                model.n_items(),
                test.n_users(),
                test.n_items()
            )));
        }
        let name = path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
        let lists = ranked_lists(&model, test, execution(cfg));
        rows.extend(evaluate(&name, &lists, &cfg.eval.ks));
        if cfg.eval.per_user {
            per_user.push((name, per_user_csv(&lists, &cfg.eval.ks)));
        }
    }
    ensure_dir(out)?;
    let csv = metrics_csv(&rows);
    write_file(&out.join("metrics.csv"), csv.as_bytes())?;
    for (name, text) in per_user {
        write_file(&out.join(format!("per_user_{name}.csv")), text.as_bytes())?;
    }
    print!("{csv}");
    Ok(())
}

pub struct ArfimaFixture {
    pub n: usize,
    pub d: f64,
    pub sigma: f64,
    pub users: usize,
    pub components: usize,
}

/// Trajectories whose components are independent ARFIMA(0, d, 0) series.
pub fn simulate_arfima_fixture(cfg: &RunConfig, fixture: &ArfimaFixture, out: &Path) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut trajs = Vec::with_capacity(fixture.users);
    for u in 0..fixture.users {
        let comps: Vec<Vec<f64>> = (0..fixture.components)
            .map(|_| simulate_arfima(fixture.n, fixture.d, fixture.sigma, rng.random()))
            .collect::<Result<_, _>>()?;
        trajs.push(Trajectory {
            user: u as UserId,
            dim_k: fixture.components,
            snapshots: (0..fixture.n).map(|t| comps.iter().map(|c| c[t]).collect()).collect(),
            epoch_boundaries: vec![fixture.n],
        });
    }
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    save_trajectories(out, &trajs)
}

pub fn simulate_cohort(cfg: &RunConfig, cohort: &CohortConfig, out: &Path) -> Result<(), CliError> {
    let cohort = generate_cohort(&CohortConfig {
        seed: cfg.run.seed,
        ..cohort.clone()
    })?;
    ensure_dir(out)?;
    let mut bytes = Vec::new();
    write_tsv(&cohort.log, &mut bytes).map_err(|e| CliError::io(out, e))?;
    write_file(&out.join("cohort.tsv"), &bytes)?;
    let truth: String = cohort
        .persistent
        .iter()
        .map(|&u| format!("{}\n", cohort.log.user_names()[u as usize]))
        .collect();
    write_file(&out.join("persistent_users.txt"), truth.as_bytes())?;
    println!(
        "wrote {} interactions for {} users; read with data.positive_rule = \"label==1\"",
        cohort.log.len(),
        cohort.log.n_users()
    );
    Ok(())
}
