mod common;

use std::fs;

use common::{run_scenario, sketch, CAVITY_REQUIREMENT};
use swarmfoam::environment::{read_trace, MessageKind, Phase};
use swarmfoam::llm::AgentRole;
use swarmfoam::reviewer::ErrorType;

#[test]
fn s1_converges_after_one_round() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_scenario("s1", CAVITY_REQUIREMENT, None, dir.path(), |_| {});
    assert!(r.success, "{}", r.reason);
    assert_eq!(r.k_used, 1);
    assert_eq!(r.phase, Phase::Done);
    assert_eq!(r.run_rounds, 2);
    assert_eq!(r.diagnoses.len(), 1);
    assert_eq!(r.diagnoses[0].error_type, ErrorType::MissingFile);
    assert_eq!(r.diagnoses[0].file_path, "0/p");
    assert!(r.case_dir.join("0/p").is_file());
    let trace = read_trace(r.trace_path.as_ref().unwrap()).unwrap();
    assert_eq!(trace.len(), r.messages.len());
    assert_eq!(trace.last().unwrap().kind, MessageKind::Terminal);
}

#[test]
fn always_failing_hits_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_scenario("always_failing", CAVITY_REQUIREMENT, None, dir.path(), |_| {});
    assert!(!r.success);
    assert_eq!(r.k_used, 20);
    assert_eq!(r.run_rounds, 21);
    assert_eq!(r.phase, Phase::Failed);
    assert!(r.diagnoses.iter().all(|d| d.error_type == ErrorType::FormatError && d.file_path == "system/fvSolution"));
}

#[test]
fn smaller_cap_is_respected() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_scenario("always_failing", CAVITY_REQUIREMENT, None, dir.path(), |c| c.k_max = 3);
    assert_eq!((r.success, r.k_used, r.run_rounds), (false, 3, 4));
}

#[test]
fn no_reviewer_runs_once() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_scenario("always_failing", CAVITY_REQUIREMENT, None, dir.path(), |c| c.ablation.reviewer_enabled = false);
    assert!(!r.success);
    assert_eq!(r.run_rounds, 1);
    assert_eq!(r.count(MessageKind::Diagnosis), 0);
    assert!(!r.ledger.entries.iter().any(|e| e.role == AgentRole::Reviewer));
}

#[test]
fn combustion_corrects_fv_solution() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_scenario("combustion", "methane counter-flow flame with reactingFoam", None, dir.path(), |_| {});
    assert!(r.success, "{}", r.reason);
    assert_eq!(r.k_used, 1);
    assert_eq!(r.diagnoses[0].file_path, "system/fvSolution");
    assert!(r.diagnoses[0].description.contains("rhoFinal"));
    for f in ["0/CH4", "0/N2", "0/O2", "0/T", "constant/thermophysicalProperties"] {
        assert!(r.case_dir.join(f).is_file(), "{f}");
    }
    let fv = fs::read_to_string(r.case_dir.join("system/fvSolution")).unwrap();
    assert!(fv.contains("\"rho.*\""));
}

#[test]
fn post_processing_repairs_the_script() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_scenario("cavity_post", CAVITY_REQUIREMENT, None, dir.path(), |_| {});
    assert!(r.success, "{}", r.reason);
    assert_eq!(r.k_used, 0);
    let post = r.post.as_ref().expect("post-processing ran");
    assert!(post.success);
    assert_eq!(post.history.len(), 2);
    assert!(r.agent_sequence().contains(&AgentRole::ParaMaster));
    let purposes: Vec<&str> = r.ledger.entries.iter().map(|e| e.purpose.as_str()).collect();
    assert!(purposes.contains(&"ParaWrite") && purposes.contains(&"ParaReason"));
    assert!(post.images().iter().any(|p| p.ends_with("velocity.png")));
}

#[test]
fn image_routing_methods() {
    let req = "simulate the flow in the channel shown in the sketch";
    let dir = tempfile::tempdir().unwrap();
    let m1 = run_scenario("obstacle_channel", req, Some(sketch()), dir.path(), |_| {});
    assert!(m1.success, "{}", m1.reason);
    let mm: Vec<&str> = m1.ledger.entries.iter().filter(|e| e.multimodal).map(|e| e.purpose.as_str()).collect();
    assert_eq!(mm, ["ObservePicture"]);
    let bmd = fs::read_to_string(m1.case_dir.join("system/blockMeshDict")).unwrap();
    assert!(bmd.contains("1200") && bmd.contains("Inlet"));

    let dir = tempfile::tempdir().unwrap();
    let m2 = run_scenario("obstacle_channel", req, Some(sketch()), dir.path(), |c| c.ablation.observe_picture_enabled = false);
    assert!(m2.success, "{}", m2.reason);
    assert!(!m2.ledger.entries.iter().any(|e| e.purpose == "ObservePicture"));
    let mm: Vec<&str> = m2.ledger.entries.iter().filter(|e| e.multimodal).map(|e| e.purpose.as_str()).collect();
    assert_eq!(mm, ["WriteFoamFile:system/blockMeshDict"]);
}

#[test]
fn trace_lines_are_case_relative() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_scenario("s1", CAVITY_REQUIREMENT, None, dir.path(), |_| {});
    let text = fs::read_to_string(r.trace_path.unwrap()).unwrap();
    assert!(!text.contains(dir.path().to_str().unwrap()));
}
