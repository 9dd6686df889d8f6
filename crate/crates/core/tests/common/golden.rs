use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{case_copy, fixtures};
use swarmfoam::llm::{Gateway, MockBackend, Scenario};
use swarmfoam::reviewer::{message_lines, Review, Reviewer, ReviewerConfig};
use swarmfoam::runner::{extract_errors, RunLog, RunOutcome};

#[derive(Debug, Deserialize)]
pub struct Expect {
    pub success: bool,
    pub commands: Vec<String>,
    pub remove: Vec<String>,
    pub empty_allrun: bool,
    pub tier: String,
    pub error_type: Option<String>,
    pub file_path: Option<String>,
}

pub struct Checked {
    pub name: String,
    pub expect: Expect,
    pub outcome: RunOutcome,
    pub review: Review,
}

fn load(dir: &Path) -> Checked {
    let expect: Expect = toml::from_str(&fs::read_to_string(dir.join("expect.toml")).unwrap()).unwrap();
    let case = case_copy("cavity");
    for r in &expect.remove {
        fs::remove_file(case.path().join(r)).unwrap();
    }
    if expect.empty_allrun {
        fs::write(case.path().join("Allrun"), "#!/bin/sh\ncd ${0%/*} || exit 1\n").unwrap();
    }
    let logs: Vec<RunLog> = expect
        .commands
        .iter()
        .filter_map(|c| {
            let name = format!("log.{c}");
            let content = fs::read_to_string(dir.join(&name)).ok()?;
            fs::write(case.path().join(&name), &content).unwrap();
            Some(RunLog { name, content })
        })
        .collect();
    let outcome = RunOutcome {
        success: expect.success,
        command_sequence: expect.commands.clone(),
        errors: extract_errors(&logs),
        logs,
    };
    let scenario = Scenario::load(&dir.join("scenario.toml")).unwrap();
    let gateway = Gateway::new(Box::new(MockBackend::new(scenario)));
    let reviewer = Reviewer::new(&ReviewerConfig::default()).unwrap();
    let review = reviewer.handle_error(&outcome, case.path(), &gateway).unwrap();
    if !expect.success {
        assert!(!case.path().join("log.icoFoam").exists(), "logs cleared after review");
    }
    Checked { name: dir.file_name().unwrap().to_string_lossy().into_owned(), expect, outcome, review }
}

pub fn all() -> Vec<Checked> {
    let mut dirs: Vec<_> = fs::read_dir(fixtures().join("logs")).unwrap().flatten().map(|e| e.path()).collect();
    dirs.sort();
    dirs.iter().map(|d| load(d)).collect()
}

/// Messages of `errors[1..]` that leaked into a diagnosis description.
pub fn leaked_later_errors(c: &Checked) -> Vec<String> {
    let Review::Diagnosis(d) = &c.review else { return Vec::new() };
    c.outcome.errors[1..]
        .iter()
        .flat_map(|e| message_lines(&e.excerpt).lines().map(str::to_string).collect::<Vec<_>>())
        .filter(|l| !l.trim().is_empty() && d.description.contains(l.as_str()))
        .collect()
}
