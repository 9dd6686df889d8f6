//! Rule-based stand-in for OpenFOAM applications.
//!
//! Paths in logs are written relative to `$FOAM_CASE` so that logs do not
//! depend on where the case lives.

use std::fs;
use std::path::{Component, Path};

use crate::foamcase::dict::{FoamToken, FoamValue};
use crate::foamcase::{parse_dict, patch_covered, FoamDict};

use super::profiles::{SolverProfile, SolverProfiles};
use super::{synthetic_fatal, AllrunCommand, CommandKind, CommandResult, Executor, RunnerError};

const SCHEME_DICTS: [&str; 6] = [
    "ddtSchemes",
    "gradSchemes",
    "divSchemes",
    "laplacianSchemes",
    "interpolationSchemes",
    "snGradSchemes",
];

const CONTROL_KEYWORDS: [&str; 4] = ["deltaT", "endTime", "writeControl", "writeInterval"];

fn turbulence_dimensions(field: &str) -> Option<[i32; 7]> {
    Some(match field {
        "k" => [0, 2, -2, 0, 0, 0, 0],
        "epsilon" => [0, 2, -3, 0, 0, 0, 0],
        "omega" => [0, 0, -1, 0, 0, 0, 0],
        "nut" | "nuTilda" => [0, 2, -1, 0, 0, 0, 0],
        _ => return None,
    })
}

fn dims(d: &[i32; 7]) -> String {
    let parts: Vec<String> = d.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(" "))
}

fn header(app: &str) -> String {
    format!(
        "/*---------------------------------------------------------------------------*\\\n\
         \x20 =========                 |\n\
         \x20 \\\\      /  F ield         | OpenFOAM: The Open Source CFD Toolbox\n\
         \x20  \\\\    /   O peration     | Website:  https://openfoam.org\n\
         \x20   \\\\  /    A nd           | Version:  9\n\
         \x20    \\\\/     M anipulation  | (faux-foam)\n\
         \\*---------------------------------------------------------------------------*/\n\
         Build  : 9-faux\n\
         Exec   : {app}\n\
         Case   : $FOAM_CASE\n\
         nProcs : 1\n\n"
    )
}

fn io_fatal(message: &str, rel: &str, line: usize, function: &str) -> String {
    format!(
        "\n\n--> FOAM FATAL IO ERROR: \n{message}\n\nfile: $FOAM_CASE/{rel} at line {line}.\n\n    From function {function}\n    in file db/dictionary/dictionary.C at line 1012.\n\nFOAM exiting\n\n"
    )
}

fn plain_fatal(message: &str, function: &str) -> String {
    format!("\n\n--> FOAM FATAL ERROR: \n{message}\n\n    From function {function}\n    in file faux/{function}.C at line 1.\n\nFOAM exiting\n\n")
}

fn missing_file(rel: &str) -> String {
    format!(
        "\n\n--> FOAM FATAL IO ERROR: \ncannot find file \"$FOAM_CASE/{rel}\"\n\nfile: $FOAM_CASE/{rel} at line 0.\n\n    From function virtual Foam::autoPtr<Foam::ISstream> Foam::fileOperations::uncollatedFileOperation::readStream(Foam::regIOobject&, const Foam::fileName&, const Foam::word&, bool) const\n    in file global/fileOperations/uncollatedFileOperation/uncollatedFileOperation.C at line 542.\n\nFOAM exiting\n\n"
    )
}

fn undefined_keyword(keyword: &str, dict_path: &str) -> String {
    io_fatal(
        &format!("keyword {keyword} is undefined in dictionary \"$FOAM_CASE/{dict_path}\""),
        dict_path.split('/').take(2).collect::<Vec<_>>().join("/").as_str(),
        0,
        "const Foam::entry& Foam::dictionary::lookupEntry(const Foam::word&, bool, bool) const",
    )
}

type Step<T> = Result<T, String>;

fn read_dict(case_dir: &Path, rel: &str) -> Step<FoamDict> {
    let text = fs::read_to_string(case_dir.join(rel)).map_err(|_| missing_file(rel))?;
    let dict = parse_dict(&text);
    if !dict.parse_complete {
        let (line, msg) = dict
            .diagnostics
            .first()
            .map(|d| (d.line, d.message.clone()))
            .unwrap_or((0, "unexpected end of input".into()));
        return Err(io_fatal(
            &format!("ill defined primitiveEntry: {msg}"),
            rel,
            line,
            "Foam::Istream& Foam::operator>>(Foam::Istream&, Foam::token&)",
        ));
    }
    Ok(dict)
}

fn require(dict: &FoamDict, keyword: &str, rel: &str) -> Step<()> {
    if dict.has_keyword(keyword) {
        Ok(())
    } else {
        Err(undefined_keyword(keyword, rel))
    }
}

fn first_list(tokens: &[FoamToken]) -> Option<&[FoamToken]> {
    tokens.iter().find_map(|t| match t {
        FoamToken::List { items, .. } => Some(items.as_slice()),
        _ => None,
    })
}

fn stream<'a>(dict: &'a FoamDict, keyword: &str) -> &'a [FoamToken] {
    match dict.get(keyword).map(|e| &e.value) {
        Some(FoamValue::Stream(t)) => t,
        _ => &[],
    }
}

fn scalar(dict: &FoamDict, keyword: &str) -> Option<f64> {
    dict.word(keyword)?.parse().ok()
}

pub struct FauxFoam {
    profiles: SolverProfiles,
}

impl Default for FauxFoam {
    fn default() -> Self {
        Self::new(SolverProfiles::builtin())
    }
}

impl FauxFoam {
    pub fn new(profiles: SolverProfiles) -> Self {
        Self { profiles }
    }

    pub fn profiles(&self) -> &SolverProfiles {
        &self.profiles
    }

    fn block_mesh(&self, case_dir: &Path) -> Step<String> {
        let rel = "system/blockMeshDict";
        let dict = read_dict(case_dir, rel)?;
        require(&dict, "vertices", rel)?;
        require(&dict, "blocks", rel)?;
        if !dict.has_keyword("boundary") && !dict.has_keyword("patches") {
            return Err(undefined_keyword("boundary", rel));
        }
        let n_vertices = first_list(stream(&dict, "vertices"))
            .map(|items| items.iter().filter(|t| matches!(t, FoamToken::List { .. })).count())
            .unwrap_or(0);
        let blocks = first_list(stream(&dict, "blocks")).unwrap_or(&[]);
        let mut n_blocks = 0;
        for (i, t) in blocks.iter().enumerate() {
            if t.as_word() != Some("hex") {
                continue;
            }
            n_blocks += 1;
            let Some(FoamToken::List { items, .. }) = blocks.get(i + 1) else {
                return Err(io_fatal("hex block without vertex labels", rel, 0, "Foam::cellShape::cellShape(Foam::Istream&)"));
            };
            for label in items.iter().filter_map(|t| t.as_word()).filter_map(|w| w.parse::<usize>().ok()) {
                if label >= n_vertices {
                    return Err(plain_fatal(
                        &format!(
                            "Point label {label} out of range 0..{}\n    in block hex {} of \"$FOAM_CASE/{rel}\"",
                            n_vertices.saturating_sub(1),
                            n_blocks - 1
                        ),
                        "Foam::blockDescriptor::check(const Foam::Istream&)",
                    ));
                }
            }
        }
        if n_blocks == 0 {
            return Err(plain_fatal(
                &format!("No blocks defined in \"$FOAM_CASE/{rel}\""),
                "Foam::blockMesh::createTopology(const Foam::IOdictionary&, const Foam::word&)",
            ));
        }
        let mesh = case_dir.join("constant/polyMesh");
        fs::create_dir_all(&mesh).map_err(|e| plain_fatal(&format!("cannot write polyMesh: {e}"), "Foam::polyMesh::write"))?;
        let names: Vec<&str> = dict.boundary_names.iter().map(String::as_str).collect();
        let boundary = format!("{}\n(\n{}\n)\n", names.len(), names.iter().map(|n| format!("    {n}")).collect::<Vec<_>>().join("\n"));
        for (file, body) in [("boundary", boundary.as_str()), ("points", "0\n()\n"), ("faces", "0\n()\n"), ("owner", "0\n()\n"), ("neighbour", "0\n()\n")] {
            fs::write(mesh.join(file), body).map_err(|e| plain_fatal(&format!("cannot write polyMesh: {e}"), "Foam::polyMesh::write"))?;
        }
        Ok(format!(
            "Creating block mesh from\n    \"$FOAM_CASE/{rel}\"\nCreating block edges\nNo non-planar block faces defined\nCreating topology blocks\nCreating topology patches\n\nCreating block mesh topology\n\nCreating polyMesh from blockMesh\nCreating patches\nCreating cells\nCreating points with scale 1\n    Block 0 cell size : ok\n\nWriting polyMesh with 0 cellZones\n----------------\nMesh Information\n----------------\n  nPoints: {n_vertices}\n  nBlocks: {n_blocks}\n  nPatches: {}\n\nEnd\n\n",
            names.len()
        ))
    }

    fn mesh_patches(&self, case_dir: &Path) -> Step<FoamDict> {
        if !case_dir.join("constant/polyMesh/points").is_file() {
            return Err(missing_file("constant/polyMesh/points"));
        }
        read_dict(case_dir, "system/blockMeshDict")
    }

    fn check_mesh(&self, case_dir: &Path) -> Step<String> {
        let dict = self.mesh_patches(case_dir)?;
        if dict.boundary_names.is_empty() {
            return Err(format!(
                "Checking topology...\n    Boundary definition OK.\n ***Total number of faces on empty patches is not divisible by the number of cells\n\nFailed 1 mesh checks.\n{}",
                plain_fatal("Mesh has no boundary patches", "Foam::checkTopology")
            ));
        }
        Ok("Checking geometry...\n    Mesh non-orthogonality Max: 0 average: 0\n\nMesh OK.\n\nEnd\n\n".into())
    }

    fn utility(&self, case_dir: &Path, dict: Option<&str>) -> Step<String> {
        self.mesh_patches(case_dir)?;
        if let Some(d) = dict {
            read_dict(case_dir, &format!("system/{d}"))?;
        }
        Ok("Reading dictionary\n\nEnd\n\n".into())
    }

    fn turbulence_fields(&self, case_dir: &Path, profile: &SolverProfile) -> Step<Vec<String>> {
        if !profile.turbulence {
            return Ok(Vec::new());
        }
        let rel = "constant/momentumTransport";
        let dict = read_dict(case_dir, rel)?;
        match dict.word("simulationType") {
            Some("RAS") => {}
            Some(_) | None => return Ok(Vec::new()),
        }
        let ras = dict.get("RAS").and_then(|e| e.as_dict()).ok_or_else(|| undefined_keyword("RAS", rel))?;
        let model = ras
            .iter()
            .rev()
            .find(|e| e.keyword == "model" || e.keyword == "RASModel")
            .and_then(|e| match &e.value {
                FoamValue::Stream(t) => t.first().and_then(FoamToken::as_word).map(str::to_string),
                FoamValue::Dict(_) => None,
            })
            .ok_or_else(|| undefined_keyword("model", &format!("{rel}/RAS")))?;
        self.profiles
            .turbulence_fields
            .get(&model)
            .cloned()
            .ok_or_else(|| {
                io_fatal(
                    &format!(
                        "Unknown RASModel type {model}\n\nValid RASModel types:\n{}",
                        self.profiles.turbulence_fields.keys().cloned().collect::<Vec<_>>().join("\n")
                    ),
                    rel,
                    0,
                    "Foam::RASModel::New",
                )
            })
    }

    fn solver(&self, case_dir: &Path, profile: &SolverProfile) -> Step<String> {
        let control = read_dict(case_dir, "system/controlDict")?;
        for kw in CONTROL_KEYWORDS {
            require(&control, kw, "system/controlDict")?;
        }
        let end_word = control.word("endTime").unwrap_or("").to_string();
        let end_time = scalar(&control, "endTime");
        let delta_t = scalar(&control, "deltaT");
        let (Some(end_time), Some(delta_t)) = (end_time, delta_t) else {
            return Err(io_fatal(
                &format!("wrong token type - expected Scalar, found on line 0 the word '{end_word}'"),
                "system/controlDict",
                0,
                "Foam::Istream& Foam::operator>>(Foam::Istream&, Foam::doubleScalar&)",
            ));
        };
        if delta_t.is_nan() || delta_t <= 0.0 || end_time < 0.0 {
            return Err(io_fatal(
                &format!("deltaT {delta_t} and endTime {end_time} must be positive"),
                "system/controlDict",
                0,
                "Foam::Time::setControls()",
            ));
        }
        let mesh = self.mesh_patches(case_dir)?;
        let schemes = read_dict(case_dir, "system/fvSchemes")?;
        for s in SCHEME_DICTS {
            require(&schemes, s, "system/fvSchemes")?;
        }
        let solution = read_dict(case_dir, "system/fvSolution")?;
        for c in &profile.constant {
            let rel = format!("constant/{}", c.file);
            let d = read_dict(case_dir, &rel)?;
            for kw in &c.keywords {
                require(&d, kw, &rel)?;
            }
        }
        let mut fields = profile.fields.clone();
        fields.extend(self.turbulence_fields(case_dir, profile)?);
        let mut read = Vec::new();
        for f in &fields {
            let rel = format!("0/{f}");
            let d = read_dict(case_dir, &rel)?;
            for kw in ["dimensions", "internalField", "boundaryField"] {
                require(&d, kw, &rel)?;
            }
            read.push((f.clone(), rel, d));
        }
        for (f, rel, d) in &read {
            for patch in &mesh.boundary_names {
                if !patch_covered(patch, &d.boundary_names) {
                    return Err(io_fatal(
                        &format!("Cannot find patchField entry for {patch}"),
                        rel,
                        0,
                        "void Foam::GeometricField<Type, PatchField, GeoMesh>::Boundary::readField(const Foam::DimensionedField<Type, GeoMesh>&, const Foam::dictionary&)",
                    ));
                }
            }
            let expected = profile.dimensions.get(f).copied().or_else(|| turbulence_dimensions(f));
            if let (Some(want), Some(got)) = (expected, d.dimensions) {
                if want != got {
                    return Err(io_fatal(
                        &format!("inconsistent dimensions {} for field {f}, expected {}", dims(&got), dims(&want)),
                        rel,
                        0,
                        "Foam::dimensionSet::dimensionSet(Foam::Istream&)",
                    ));
                }
            }
        }
        for alg in &profile.algorithms {
            require(&solution, alg, "system/fvSolution")?;
        }
        if !profile.solvers.is_empty() {
            let solvers = solution
                .get("solvers")
                .and_then(|e| e.as_dict())
                .ok_or_else(|| undefined_keyword("solvers", "system/fvSolution"))?;
            for name in &profile.solvers {
                if !solvers.iter().any(|e| e.matches(name)) {
                    return Err(undefined_keyword(name, "system/fvSolution/solvers"));
                }
            }
        }
        let time_dir = case_dir.join(&end_word);
        let _ = fs::create_dir_all(&time_dir);
        for (f, rel, _) in &read {
            let _ = fs::copy(case_dir.join(rel), time_dir.join(f));
        }
        let mut log = String::from("Create time\n\nCreate mesh for time = 0\n\n");
        for (f, _, _) in &read {
            log.push_str(&format!("Reading field {f}\n\n"));
        }
        log.push_str(&format!(
            "\nStarting time loop\n\nTime = {delta_t}\n\nCourant Number mean: 0 max: 0\nExecutionTime = 0.01 s  ClockTime = 0 s\n\nTime = {end_word}\n\nExecutionTime = 0.02 s  ClockTime = 0 s\n\nEnd\n\n"
        ));
        Ok(log)
    }

    fn shell(&self, case_dir: &Path, cmd: &AllrunCommand) -> bool {
        let inside = |p: &str| {
            let path = Path::new(p);
            !path.is_absolute() && path.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
        };
        let operands: Vec<&str> = cmd.args.iter().map(String::as_str).filter(|a| !a.starts_with('-')).collect();
        if !operands.iter().all(|p| inside(p)) {
            return false;
        }
        match cmd.name.as_str() {
            "restore0Dir" => {
                let orig = case_dir.join("0.orig");
                !orig.is_dir() || copy_tree(&orig, &case_dir.join("0")).is_ok()
            }
            "cp" if operands.len() == 2 => copy_tree(&case_dir.join(operands[0]), &case_dir.join(operands[1])).is_ok(),
            "mv" if operands.len() == 2 => fs::rename(case_dir.join(operands[0]), case_dir.join(operands[1])).is_ok(),
            "mkdir" => operands.iter().all(|p| fs::create_dir_all(case_dir.join(p)).is_ok()),
            "rm" => {
                for p in operands {
                    let target = case_dir.join(p);
                    if target.is_dir() {
                        let _ = fs::remove_dir_all(&target);
                    } else {
                        let _ = fs::remove_file(&target);
                    }
                }
                true
            }
            _ => true,
        }
    }
}

fn copy_tree(from: &Path, to: &Path) -> std::io::Result<()> {
    if from.is_dir() {
        fs::create_dir_all(to)?;
        for entry in fs::read_dir(from)? {
            let entry = entry?;
            copy_tree(&entry.path(), &to.join(entry.file_name()))?;
        }
        Ok(())
    } else {
        fs::copy(from, to).map(|_| ())
    }
}

impl Executor for FauxFoam {
    fn name(&self) -> &str {
        "faux"
    }

    fn execute(&self, case_dir: &Path, cmd: &AllrunCommand) -> Result<CommandResult, RunnerError> {
        if cmd.kind == CommandKind::Utility {
            return Ok(CommandResult { log: None, success: self.shell(case_dir, cmd) });
        }
        let program = cmd.program();
        let step = match program {
            "blockMesh" => self.block_mesh(case_dir),
            "checkMesh" => self.check_mesh(case_dir),
            p => match (self.profiles.solver(p), self.profiles.utility(p)) {
                (Some(profile), _) => self.solver(case_dir, profile),
                (None, Some(u)) => self.utility(case_dir, u.dict.as_deref()),
                (None, None) => {
                    let log = format!("{program}: command not found\n{}", synthetic_fatal(program, "exited with status 127"));
                    return Ok(CommandResult { log: Some(log), success: false });
                }
            },
        };
        let (body, success) = match step {
            Ok(b) => (b, true),
            Err(b) => (b, false),
        };
        Ok(CommandResult {
            log: Some(format!("{}{body}", header(program))),
            success,
        })
    }
}
