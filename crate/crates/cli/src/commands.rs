use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde_json::json;
use swarmfoam::config::RunConfig;
use swarmfoam::knowledge::{build_index, load_corpus};
use swarmfoam::metrics::{case_run_dir, cost, run_batch, run_one, BatchOptions, CaseSpec, Manifest, MetricsReport};

use crate::{EvalArgs, IndexArgs, RunArgs};

pub const SIMULATION_FAILED: u8 = 1;
pub const CONFIG_ERROR: u8 = 2;

fn timestamp() -> String {
    chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string()
}

/// `<root>/<timestamp>-<id>`, suffixed when that directory already exists.
fn fresh_run_dir(root: &Path, ts: &str, id: &str) -> PathBuf {
    let base = root.join(format!("{ts}-{id}"));
    let mut dir = base.clone();
    let mut n = 1;
    while dir.exists() {
        dir = PathBuf::from(format!("{}.{n}", base.display()));
        n += 1;
    }
    dir
}

/// A timestamp whose `<ts>-<case_id>` directories are all unused.
fn batch_timestamp(root: &Path, manifest: &Manifest) -> String {
    let base = timestamp();
    let mut ts = base.clone();
    let mut n = 1;
    while manifest.cases.iter().any(|c| case_run_dir(root, &ts, &c.id).exists()) {
        ts = format!("{base}.{n}");
        n += 1;
    }
    ts
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn run(a: &RunArgs) -> Result<ExitCode> {
    if !a.requirement.is_file() {
        bail!("requirement file {} does not exist", a.requirement.display());
    }
    if let Some(img) = a.image.as_ref().filter(|p| !p.is_file()) {
        bail!("image file {} does not exist", img.display());
    }
    let cfg = RunConfig::resolve(a.common.config.as_deref(), &a.common.overrides())?;
    let id = match &a.case_id {
        Some(id) => id.clone(),
        None => a
            .requirement
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("case")
            .to_string(),
    };
    if id.is_empty() || id.contains(['/', '\\']) {
        bail!("invalid case id {id:?}");
    }
    // Fail on a bad scenario or backend before creating any directories.
    cfg.session(None)?;
    let kb = cfg.knowledge_base()?;
    let executor = cfg.executor()?;
    let spec = CaseSpec {
        id: id.clone(),
        requirement: a.requirement.clone(),
        image: a.image.clone(),
        modality: None,
        scenario: None,
    };
    let run_dir = fresh_run_dir(&cfg.case_root, &timestamp(), &id);
    fs::create_dir_all(&run_dir).with_context(|| format!("creating {}", run_dir.display()))?;

    let (result, record) = match run_one(&cfg, &kb, executor.as_ref(), &spec, &run_dir) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: workflow aborted: {e}");
            return Ok(ExitCode::from(SIMULATION_FAILED));
        }
    };
    let case_cost = cost(std::slice::from_ref(&record), &cfg.backend.prices)?;
    let summary = json!({
        "success": result.success,
        "k_used": result.k_used,
        "tokens": result.totals.sum(),
        "cost": case_cost,
    });
    let metrics = MetricsReport::build(
        vec![record],
        cfg.k_max,
        &cfg.backend.prices,
        cfg.method(),
        cfg.ablation.reviewer_enabled,
    )?;
    let report = json!({
        "case_id": id,
        "summary": summary,
        "reason": result.reason,
        "run_rounds": result.run_rounds,
        "case_dir": result.case_dir,
        "trace": result.trace_path,
        "metrics": metrics,
    });
    write_json(&run_dir.join("report.json"), &report)?;
    println!("{summary}");
    eprintln!("artifacts: {}", run_dir.display());
    Ok(if result.success { ExitCode::SUCCESS } else { ExitCode::from(SIMULATION_FAILED) })
}

pub fn eval(a: &EvalArgs) -> Result<ExitCode> {
    if a.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let cfg = RunConfig::resolve(a.common.config.as_deref(), &a.common.overrides())?;
    let manifest = Manifest::load(&a.manifest).with_context(|| format!("manifest {}", a.manifest.display()))?;
    let ts = batch_timestamp(&cfg.case_root, &manifest);
    let opts = BatchOptions { jobs: a.jobs, runs_root: cfg.case_root.clone(), timestamp: ts.clone() };
    let (report, outputs) = run_batch(&manifest, &cfg, &opts)?;
    let out = a.out.clone().unwrap_or_else(|| cfg.case_root.join(format!("{ts}-report.json")));
    write_json(&out, &serde_json::to_value(&report)?)?;
    for o in &outputs {
        eprintln!(
            "{:<20} {:<5} k={} {}",
            o.record.case_id,
            if o.record.success { "pass" } else { "fail" },
            o.record.k_i,
            o.run_dir.display()
        );
    }
    println!(
        "{}",
        json!({
            "method": report.method,
            "cases": report.per_case.len(),
            "pass_rate": report.pass_rate,
            "iterations": report.iterations,
            "token_usage": report.token_usage,
            "cost": report.cost,
            "report": out,
        })
    );
    Ok(ExitCode::SUCCESS)
}

pub fn index(a: &IndexArgs) -> Result<ExitCode> {
    let cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let dir = a
        .corpus
        .clone()
        .or_else(|| cfg.knowledge.corpus.clone())
        .unwrap_or_else(|| PathBuf::from(swarmfoam::config::SHIPPED_CORPUS));
    let corpus = load_corpus(&dir).with_context(|| format!("corpus {}", dir.display()))?;
    let index = build_index(&corpus, cfg.index_params())?;
    index.save(&a.out)?;
    for (category, n) in corpus.counts() {
        println!("{category}: {n}");
    }
    eprintln!("index written to {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}
