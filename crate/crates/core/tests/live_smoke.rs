//! Needs a real backend key and an OpenFOAM-9 installation on PATH.
//! Run with `cargo test -p swarmfoam-core --test live_smoke -- --ignored`.

mod common;

use swarmfoam::config::{Overrides, RunConfig, RunnerKind};
use swarmfoam::environment::{read_trace, run_workflow, MessageKind, WorkflowDeps};
use swarmfoam::metrics::{CaseRecord, MetricsReport, Modality};

#[test]
#[ignore]
fn live_cavity_natural_language() {
    let overrides = Overrides { live_backend: Some(true), runner: Some(RunnerKind::Subprocess), ..Default::default() };
    let cfg = RunConfig::resolve(None, &overrides).unwrap();
    let (gateway, post) = cfg.session(None).unwrap();
    let executor = cfg.executor().unwrap();
    let kb = cfg.knowledge_base().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let deps = WorkflowDeps { gateway: &gateway, kb: &kb, executor: executor.as_ref(), post: post.as_ref() };
    let wcfg = cfg.workflow_config("cavity-live", dir.path().join("case"), Some(dir.path().join("trace.jsonl")));
    let r = run_workflow("do a 2D RANS simulation of incompressible cavity flow using icoFoam", None, &deps, &wcfg).unwrap();
    assert!(r.success || r.k_used == cfg.k_max, "{}", r.reason);

    let trace = read_trace(&dir.path().join("trace.jsonl")).unwrap();
    assert_eq!(trace.last().unwrap().kind, MessageKind::Terminal);
    for m in &trace {
        m.decode().unwrap();
    }
    let t = r.totals;
    let record = CaseRecord {
        case_id: "cavity-live".into(),
        modality: Modality::NaturalLanguage,
        success: r.success,
        k_i: r.k_used,
        t_in: t.t_in,
        t_think: t.t_think,
        t_out: t.t_out,
        diagnoses: r.diagnoses.clone(),
    };
    let report = MetricsReport::build(vec![record], cfg.k_max, &cfg.backend.prices, cfg.method(), true).unwrap();
    let json = serde_json::to_string(&report).unwrap();
    let back: MetricsReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
}
