#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.path().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), &target).unwrap();
        }
    }
}

/// A scratch copy of `tests/fixtures/cases/<name>`.
pub fn case_copy(name: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixtures().join("cases").join(name), dir.path());
    dir
}

pub fn edit(path: &Path, from: &str, to: &str) {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.contains(from), "{} lacks {from:?}", path.display());
    fs::write(path, text.replacen(from, to, 1)).unwrap();
}

pub mod golden;

use std::sync::OnceLock;

use swarmfoam::config::RunConfig;
use swarmfoam::environment::{run_workflow, WorkflowDeps, WorkflowResult};
use swarmfoam::knowledge::KnowledgeBase;
use swarmfoam::llm::Image;

pub const CAVITY_REQUIREMENT: &str =
    "do a 2D simulation of incompressible lid-driven cavity flow using icoFoam, lid velocity 1 m/s, nu 0.01";

pub fn shipped_kb() -> &'static KnowledgeBase {
    static KB: OnceLock<KnowledgeBase> = OnceLock::new();
    KB.get_or_init(|| RunConfig::default().knowledge_base().unwrap())
}

pub fn sketch() -> Image {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/files/obstacle_channel/sketch.png");
    Image::from_path(&p).unwrap()
}

/// Runs a shipped scenario on faux-foam inside `root`.
pub fn run_scenario(
    scenario: &str,
    requirement: &str,
    image: Option<Image>,
    root: &Path,
    tweak: impl FnOnce(&mut RunConfig),
) -> WorkflowResult {
    let mut cfg = RunConfig::default();
    tweak(&mut cfg);
    let (gateway, post) = cfg.session(Some(scenario)).unwrap();
    let executor = cfg.executor().unwrap();
    let deps = WorkflowDeps { gateway: &gateway, kb: shipped_kb(), executor: executor.as_ref(), post: post.as_ref() };
    let wcfg = cfg.workflow_config(scenario, root.join("case"), Some(root.join("trace.jsonl")));
    run_workflow(requirement, image, &deps, &wcfg).unwrap()
}
