use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{CaseRecord, MetricsError, MetricsReport, Modality};
use crate::config::RunConfig;
use crate::environment::{run_workflow, WorkflowDeps, WorkflowResult};
use crate::knowledge::KnowledgeBase;
use crate::llm::Image;
use crate::runner::Executor;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub id: String,
    /// Text file holding the requirement.
    pub requirement: PathBuf,
    pub image: Option<PathBuf>,
    pub modality: Option<Modality>,
    /// Mock scenario name or path.
    pub scenario: Option<String>,
}

impl CaseSpec {
    pub fn modality(&self) -> Modality {
        self.modality.unwrap_or(if self.image.is_some() { Modality::Multimodal } else { Modality::NaturalLanguage })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(rename = "case", default)]
    pub cases: Vec<CaseSpec>,
}

impl Manifest {
    /// Parses a manifest; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, MetricsError> {
        let mut m: Manifest = toml::from_str(text).map_err(|e| MetricsError::Manifest(e.to_string()))?;
        if m.cases.is_empty() {
            return Err(MetricsError::EmptyRecords);
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &mut m.cases {
            if !seen.insert(c.id.clone()) {
                return Err(MetricsError::Manifest(format!("duplicate case id {:?}", c.id)));
            }
            if c.id.is_empty() || c.id.contains(['/', '\\']) {
                return Err(MetricsError::Manifest(format!("invalid case id {:?}", c.id)));
            }
            c.requirement = base.join(&c.requirement);
            c.image = c.image.as_ref().map(|p| base.join(p));
            for p in std::iter::once(&c.requirement).chain(c.image.as_ref()) {
                if !p.is_file() {
                    return Err(MetricsError::Manifest(format!("case {}: {} does not exist", c.id, p.display())));
                }
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        let text = fs::read_to_string(path).map_err(|source| MetricsError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub jobs: usize,
    /// Directory receiving one `<timestamp>-<case_id>` folder per case.
    pub runs_root: PathBuf,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseOutput {
    pub record: CaseRecord,
    pub run_dir: PathBuf,
    pub trace_path: Option<PathBuf>,
    pub reason: String,
    pub run_rounds: u32,
}

pub fn case_run_dir(runs_root: &Path, timestamp: &str, case_id: &str) -> PathBuf {
    runs_root.join(format!("{timestamp}-{case_id}"))
}

fn record_from(spec: &CaseSpec, r: &WorkflowResult) -> CaseRecord {
    CaseRecord {
        case_id: spec.id.clone(),
        modality: spec.modality(),
        success: r.success,
        k_i: r.k_used,
        t_in: r.totals.t_in,
        t_think: r.totals.t_think,
        t_out: r.totals.t_out,
        diagnoses: r.diagnoses.clone(),
    }
}

/// Runs one manifest case into `run_dir` (`case/` and `trace.jsonl`).
pub fn run_one(
    cfg: &RunConfig,
    kb: &KnowledgeBase,
    executor: &dyn Executor,
    spec: &CaseSpec,
    run_dir: &Path,
) -> Result<(WorkflowResult, CaseRecord), String> {
    let requirement =
        fs::read_to_string(&spec.requirement).map_err(|e| format!("{}: {e}", spec.requirement.display()))?;
    let image = spec.image.as_deref().map(Image::from_path).transpose().map_err(|e| e.to_string())?;
    let (gateway, post) = cfg.session(spec.scenario.as_deref()).map_err(|e| e.to_string())?;
    let wf = cfg.workflow_config(&spec.id, run_dir.join("case"), Some(run_dir.join("trace.jsonl")));
    let deps = WorkflowDeps { gateway: &gateway, kb, executor, post: post.as_ref() };
    let result = run_workflow(requirement.trim(), image, &deps, &wf).map_err(|e| e.to_string())?;
    let record = record_from(spec, &result);
    Ok((result, record))
}

/// Runs every case; failures are recorded, never fatal to the batch.
pub fn run_batch(
    manifest: &Manifest,
    cfg: &RunConfig,
    opts: &BatchOptions,
) -> Result<(MetricsReport, Vec<CaseOutput>), MetricsError> {
    if manifest.cases.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let kb = cfg.knowledge_base().map_err(|e| MetricsError::Manifest(e.to_string()))?;
    let executor = cfg.executor().map_err(|e| MetricsError::Manifest(e.to_string()))?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<CaseOutput>>> = Mutex::new(vec![None; manifest.cases.len()]);
    let jobs = opts.jobs.clamp(1, manifest.cases.len());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(spec) = manifest.cases.get(i) else { break };
                let run_dir = case_run_dir(&opts.runs_root, &opts.timestamp, &spec.id);
                let out = match run_one(cfg, &kb, executor.as_ref(), spec, &run_dir) {
                    Ok((result, record)) => CaseOutput {
                        record,
                        run_dir: run_dir.clone(),
                        trace_path: result.trace_path.clone(),
                        reason: result.reason.clone(),
                        run_rounds: result.run_rounds,
                    },
                    Err(reason) => {
                        log::error!("case {} aborted: {reason}", spec.id);
                        CaseOutput {
                            record: CaseRecord {
                                case_id: spec.id.clone(),
                                modality: spec.modality(),
                                success: false,
                                k_i: 0,
                                t_in: 0,
                                t_think: 0,
                                t_out: 0,
                                diagnoses: vec![],
                            },
                            run_dir,
                            trace_path: None,
                            reason,
                            run_rounds: 0,
                        }
                    }
                };
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(out);
            });
        }
    });
    let outputs: Vec<CaseOutput> = slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|o| o.expect("every case produces an output"))
        .collect();
    let records = outputs.iter().map(|o| o.record.clone()).collect();
    let report = MetricsReport::build(
        records,
        cfg.k_max,
        &cfg.backend.prices,
        cfg.method(),
        cfg.ablation.reviewer_enabled,
    )?;
    Ok((report, outputs))
}
