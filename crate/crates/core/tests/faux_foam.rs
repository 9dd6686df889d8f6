mod common;

use std::fs;
use std::path::Path;

use common::{case_copy, edit};
use swarmfoam::runner::{run_case, FauxFoam, RunOutcome, Severity};

fn run(dir: &Path) -> RunOutcome {
    run_case(dir, &FauxFoam::default()).unwrap()
}

fn fatal_count(text: &str) -> usize {
    text.matches("FOAM FATAL").count()
}

#[test]
fn pristine_cavity_runs() {
    let dir = case_copy("cavity");
    let out = run(dir.path());
    assert!(out.success, "{:#?}", out.errors);
    let names: Vec<_> = out.logs.iter().map(|l| l.name.as_str()).collect();
    assert_eq!(names, ["log.blockMesh", "log.icoFoam"]);
    assert_eq!(out.command_sequence, ["blockMesh", "icoFoam"]);
    for l in &out.logs {
        assert!(l.content.trim_end().ends_with("End"), "{}", l.name);
        assert_eq!(fatal_count(&l.content), 0);
    }
    assert!(dir.path().join("0.5/U").is_file());
    assert!(dir.path().join("log.icoFoam").is_file());
    assert!(!out.logs[1].content.contains(dir.path().to_str().unwrap()));
}

#[test]
fn undefined_vertex_index() {
    let dir = case_copy("cavity");
    edit(&dir.path().join("system/blockMeshDict"), "hex (0 1 2 3 4 5 6 7)", "hex (0 1 2 3 4 5 6 9)");
    let out = run(dir.path());
    assert!(!out.success);
    assert!(out.log("log.blockMesh").unwrap().contains("FOAM FATAL ERROR"));
    assert_eq!(out.errors[0].source_log, "log.blockMesh");
}

#[test]
fn missing_pressure_field() {
    let dir = case_copy("cavity");
    fs::remove_file(dir.path().join("0/p")).unwrap();
    let out = run(dir.path());
    assert!(!out.success);
    let log = out.log("log.icoFoam").unwrap();
    assert!(log.contains("cannot find file \"$FOAM_CASE/0/p\""));
    assert_eq!(out.errors.len(), 1);
    assert!(out.errors[0].excerpt.contains("0/p"));
}

#[test]
fn missing_solvers_block() {
    let dir = case_copy("cavity");
    let path = dir.path().join("system/fvSolution");
    let text = fs::read_to_string(&path).unwrap();
    let start = text.find("solvers").unwrap();
    let end = text.find("PISO").unwrap();
    fs::write(&path, format!("{}{}", &text[..start], &text[end..])).unwrap();
    let out = run(dir.path());
    assert!(!out.success);
    assert!(out.errors[0].excerpt.contains("keyword solvers is undefined"));
    assert!(out.errors[0].excerpt.contains("system/fvSolution"));
}

#[test]
fn missing_piso_dict() {
    let dir = case_copy("cavity");
    edit(&dir.path().join("system/fvSolution"), "PISO\n{", "PIMPLE\n{");
    let out = run(dir.path());
    assert!(out.errors[0].excerpt.contains("keyword PISO is undefined"));
}

#[test]
fn uncovered_patch() {
    let dir = case_copy("cavity");
    edit(&dir.path().join("0/U"), "movingWall", "lid");
    let out = run(dir.path());
    assert!(out.errors[0].excerpt.contains("Cannot find patchField entry for movingWall"));
    assert!(out.errors[0].excerpt.contains("$FOAM_CASE/0/U"));
}

#[test]
fn wrong_dimensions() {
    let dir = case_copy("cavity");
    edit(&dir.path().join("0/p"), "[0 2 -2 0 0 0 0]", "[1 -1 -2 0 0 0 0]");
    let out = run(dir.path());
    assert!(out.errors[0].excerpt.contains("inconsistent dimensions"));
}

#[test]
fn empty_boundary_fails_check_mesh() {
    let dir = case_copy("cavity");
    let dict = dir.path().join("system/blockMeshDict");
    let text = fs::read_to_string(&dict).unwrap();
    let start = text.find("boundary\n(").unwrap();
    let end = text[start..].find("\n);").unwrap() + start + 3;
    fs::write(&dict, format!("{}boundary\n(\n);{}", &text[..start], &text[end..])).unwrap();
    edit(&dir.path().join("Allrun"), "runApplication blockMesh\n", "runApplication blockMesh\nrunApplication checkMesh\n");
    let out = run(dir.path());
    let log = out.log("log.checkMesh").unwrap();
    assert!(log.contains("Failed 1 mesh checks."));
}

#[test]
fn unknown_application() {
    let dir = case_copy("cavity");
    edit(&dir.path().join("system/controlDict"), "application     icoFoam;", "application     icoFaom;");
    let out = run(dir.path());
    assert!(out.errors[0].excerpt.contains("icoFaom"));
}

/// Every failing log holds exactly one fatal block, and each is extracted.
#[test]
fn one_fatal_block_per_failure() {
    type Mutation = fn(&Path);
    let mutations: Vec<(&str, Mutation)> = vec![
        ("no blockMeshDict", |d| fs::remove_file(d.join("system/blockMeshDict")).unwrap()),
        ("unbalanced blockMeshDict", |d| edit(&d.join("system/blockMeshDict"), "blocks\n(", "blocks\n((")),
        ("no vertices", |d| edit(&d.join("system/blockMeshDict"), "vertices", "vertexes")),
        ("no blocks", |d| edit(&d.join("system/blockMeshDict"), "blocks", "blokcs")),
        ("no boundary", |d| edit(&d.join("system/blockMeshDict"), "boundary", "boundry")),
        ("bad vertex", |d| edit(&d.join("system/blockMeshDict"), "4 5 6 7)", "4 5 6 8)")),
        ("no controlDict", |d| fs::remove_file(d.join("system/controlDict")).unwrap()),
        ("no deltaT", |d| edit(&d.join("system/controlDict"), "deltaT", "deltaTime")),
        ("bad endTime", |d| edit(&d.join("system/controlDict"), "endTime         0.5;", "endTime         soon;")),
        ("no fvSchemes", |d| fs::remove_file(d.join("system/fvSchemes")).unwrap()),
        ("no divSchemes", |d| edit(&d.join("system/fvSchemes"), "divSchemes", "divSchemez")),
        ("no fvSolution", |d| fs::remove_file(d.join("system/fvSolution")).unwrap()),
        ("no pFinal", |d| edit(&d.join("system/fvSolution"), "pFinal", "pFinall")),
        ("no transportProperties", |d| fs::remove_file(d.join("constant/transportProperties")).unwrap()),
        ("no nu", |d| edit(&d.join("constant/transportProperties"), "nu ", "mu ")),
        ("no 0/U", |d| fs::remove_file(d.join("0/U")).unwrap()),
        ("no dimensions", |d| edit(&d.join("0/U"), "dimensions", "dimension")),
        ("unterminated 0/p", |d| edit(&d.join("0/p"), "type            empty;\n    }", "type            empty;\n    ")),
    ];
    for (label, mutate) in mutations {
        let dir = case_copy("cavity");
        mutate(dir.path());
        let out = run(dir.path());
        assert!(!out.success, "{label}");
        let failing: Vec<_> = out.logs.iter().filter(|l| fatal_count(&l.content) > 0).collect();
        assert!(!failing.is_empty(), "{label}");
        for l in &failing {
            assert_eq!(fatal_count(&l.content), 1, "{label}: {}", l.name);
        }
        let fatals: Vec<_> = out.errors.iter().filter(|e| e.severity == Severity::Fatal).collect();
        assert_eq!(fatals.len(), failing.len(), "{label}");
        assert_eq!(fatals[0].source_log, failing[0].name, "{label}");
    }
}
