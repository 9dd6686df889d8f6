use std::fs;
use std::path::{Path, PathBuf};

use swarmfoam::config::RunConfig;
use swarmfoam::metrics::{case_run_dir, run_batch, BatchOptions, Manifest, MetricsError, Modality, ReportCategory};

fn demo_manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases/manifest.toml")
}

fn batch(jobs: usize, root: &Path) -> (swarmfoam::metrics::MetricsReport, Vec<swarmfoam::metrics::CaseOutput>) {
    let manifest = Manifest::load(&demo_manifest()).unwrap();
    let opts = BatchOptions { jobs, runs_root: root.to_path_buf(), timestamp: "20260101T000000".into() };
    run_batch(&manifest, &RunConfig::default(), &opts).unwrap()
}

#[test]
fn demo_set_report() {
    let dir = tempfile::tempdir().unwrap();
    let (report, outputs) = batch(2, dir.path());
    assert_eq!(outputs.len(), 5);
    assert!((report.pass_rate - 0.8).abs() < 1e-12);
    // cavity 1, cavity-plot 0, cavity-stuck charged k_max, obstacle 0, flame 1
    assert!((report.iterations - 22.0 / 5.0).abs() < 1e-12);
    assert_eq!(report.method, 1);
    assert_eq!(report.per_modality[&Modality::Multimodal].pass_rate, 1.0);
    assert_eq!(report.histogram.count(ReportCategory::Configuration), 21);
    assert_eq!(report.histogram.count(ReportCategory::MissingFile), 1);
    for o in &outputs {
        assert_eq!(o.run_dir, case_run_dir(dir.path(), "20260101T000000", &o.record.case_id));
        assert!(o.trace_path.as_ref().unwrap().is_file());
    }
}

#[test]
fn job_count_does_not_change_records() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ra, _) = batch(1, a.path());
    let (rb, _) = batch(4, b.path());
    assert_eq!(ra.per_case, rb.per_case);
}

#[test]
fn manifest_rejections() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("r.txt"), "x").unwrap();
    let dup = "[[case]]\nid = \"a\"\nrequirement = \"r.txt\"\n[[case]]\nid = \"a\"\nrequirement = \"r.txt\"\n";
    assert!(matches!(Manifest::parse(dup, dir.path()), Err(MetricsError::Manifest(_))));
    let missing = "[[case]]\nid = \"a\"\nrequirement = \"nope.txt\"\n";
    assert!(matches!(Manifest::parse(missing, dir.path()), Err(MetricsError::Manifest(_))));
    assert!(matches!(Manifest::parse("", dir.path()), Err(MetricsError::EmptyRecords)));
}
