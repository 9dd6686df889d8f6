//! InputWriter: writes each planned file, then repairs files named by the
//! Reviewer.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::foamcase::{
    check_dependencies, clean_file, read_case, write_file, CaseError, FilePlanEntry, FoamFile, Folder, Inconsistency,
    StructuredCaseInfo,
};
use crate::knowledge::{Category, KnowledgeBase, KnowledgeError};
use crate::llm::{render_prompt, AgentRole, Gateway, Image, LlmError, TemplateId};
use crate::perception::{PerceptionReport, TaskSplit};
use crate::reviewer::{ErrorDiagnosis, ErrorType};

pub const BLOCKMESH_DICT: &str = "system/blockMeshDict";

#[derive(Debug, thiserror::Error)]
pub enum WriterError {
    #[error("reply for {0} was empty after cleaning, twice")]
    EmptyAfterClean(String),
    #[error("diagnosis names no file")]
    NoTarget,
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

/// Everything the writer needs besides the target entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WriteContext {
    pub requirement: String,
    pub task: TaskSplit,
    pub report: PerceptionReport,
    pub info: StructuredCaseInfo,
    pub plan: Vec<FilePlanEntry>,
    /// Raw image, forwarded only when observation is bypassed.
    #[serde(skip)]
    pub image: Option<Image>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteReport {
    pub file: FoamFile,
    pub inconsistencies: Vec<Inconsistency>,
}

/// Files whose content is shown to the model when writing `entry`.
pub fn dependencies(entry: &FilePlanEntry, plan: &[FilePlanEntry]) -> Vec<FilePlanEntry> {
    let named = |paths: &[&str]| paths.iter().filter_map(|p| p.parse().ok()).collect();
    match (entry.folder(), entry.filename()) {
        (Folder::Zero, _) => named(&[BLOCKMESH_DICT, "constant/transportProperties"]),
        (Folder::System, "fvSolution" | "fvSchemes") => named(&["system/controlDict"]),
        (Folder::Root, "Allrun") => plan.iter().filter(|e| *e != entry).cloned().collect(),
        _ => Vec::new(),
    }
}

fn associated(entry: &FilePlanEntry, plan: &[FilePlanEntry], existing: &[FoamFile]) -> String {
    let parts: Vec<String> = dependencies(entry, plan)
        .iter()
        .filter_map(|d| existing.iter().find(|f| &f.entry == d))
        .map(|f| format!("{}:\n{}", f.rel_path(), f.content.trim_end()))
        .collect();
    if parts.is_empty() {
        "None".into()
    } else {
        parts.join("\n\n")
    }
}

fn or_none(v: &Option<String>) -> String {
    v.clone().unwrap_or_else(|| "None".into())
}

fn generate(
    entry: &FilePlanEntry,
    requirement: String,
    ctx: &WriteContext,
    case_dir: &Path,
    gateway: &Gateway,
    kb: &KnowledgeBase,
) -> Result<WriteReport, WriterError> {
    let rel = entry.rel_path();
    let solver = &ctx.info.case_solver;

    let help = kb.retrieve(&format!("{solver} {}", entry.filename()), Category::SolverHelp)?;
    gateway.record_retrieval(AgentRole::InputWriter, &format!("Retrieve:SolverHelp:{rel}"));
    let similar = kb.retrieve(&format!("{solver} {} {rel}", ctx.info.case_name), Category::InputFiles)?;
    gateway.record_retrieval(AgentRole::InputWriter, &format!("Retrieve:InputFiles:{rel}"));

    let existing = read_case(case_dir)?;
    let mut b = HashMap::new();
    b.insert("requirement", requirement);
    b.insert(
        "CFD_task",
        format!(
            "{}\nCase name: {}. Domain: {}. Solver: {}. Category: {}.\nWrite the file {rel}.",
            ctx.task.simulation_task, ctx.info.case_name, ctx.info.case_domain, solver, ctx.info.case_category
        ),
    );
    b.insert("physical_information", or_none(&ctx.report.physical_description));
    b.insert("geometrical_information", or_none(&ctx.report.geometric_description));
    b.insert("solver", format!("{solver}: {}\n{}", ctx.info.solver_description, help.joined_text()));
    b.insert("similar_file", similar.joined_text());
    b.insert("associated_file", associated(entry, &ctx.plan, &existing));
    let prompt = render_prompt(TemplateId::WriteFoamFile, &b)?;

    let purpose = format!("WriteFoamFile:{rel}");
    let image = ctx.image.as_ref().filter(|_| rel == BLOCKMESH_DICT);
    let ask = |p: &str| match image {
        Some(img) => gateway.complete_multimodal(AgentRole::InputWriter, &purpose, p, img),
        None => gateway.complete_text(AgentRole::InputWriter, &purpose, p),
    };
    let content = match clean_file(&ask(&prompt)?.text) {
        Ok(c) => c,
        Err(_) => {
            log::warn!("{rel}: empty reply, retrying once");
            let retry = format!("{prompt}\n\nThe previous reply contained no file content. Return the complete content of {rel}.\n");
            clean_file(&ask(&retry)?.text).map_err(|_| WriterError::EmptyAfterClean(rel.clone()))?
        }
    };
    let file = FoamFile::new(entry.clone(), content);
    write_file(case_dir, &file)?;
    let others: Vec<FoamFile> = existing.into_iter().filter(|f| f.entry != *entry).collect();
    let inconsistencies = check_dependencies(&file, &others);
    for i in &inconsistencies {
        log::warn!("{rel}: {:?} {}", i.kind, i.detail);
    }
    Ok(WriteReport { file, inconsistencies })
}

pub fn first_write(
    entry: &FilePlanEntry,
    ctx: &WriteContext,
    case_dir: &Path,
    gateway: &Gateway,
    kb: &KnowledgeBase,
) -> Result<WriteReport, WriterError> {
    generate(entry, ctx.requirement.clone(), ctx, case_dir, gateway, kb)
}

/// Rewrites (or creates) the single file named by `diag`.
pub fn correct_file(
    diag: &ErrorDiagnosis,
    ctx: &WriteContext,
    case_dir: &Path,
    gateway: &Gateway,
    kb: &KnowledgeBase,
) -> Result<WriteReport, WriterError> {
    let entry = diag.entry().ok_or(WriterError::NoTarget)?;
    let rel = entry.rel_path();
    let mut requirement = format!(
        "{}\n\nThe file {rel} must be corrected. Error ({}): {}",
        ctx.requirement, diag.error_type, diag.description
    );
    match diag.error_type {
        ErrorType::MissingFile => requirement.push_str(&format!("\nThe file {rel} does not exist yet; create it.")),
        _ => {
            if let Ok(previous) = std::fs::read_to_string(crate::foamcase::file_path(case_dir, &entry)) {
                requirement.push_str(&format!("\nCurrent content of {rel}:\n{previous}"));
            }
        }
    }
    generate(&entry, requirement, ctx, case_dir, gateway, kb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foamcase::{base_plan, plan_order};

    fn e(p: &str) -> FilePlanEntry {
        p.parse().unwrap()
    }

    #[test]
    fn dependency_graph() {
        let plan = plan_order(base_plan());
        let paths = |v: Vec<FilePlanEntry>| v.iter().map(|x| x.rel_path()).collect::<Vec<_>>();
        assert_eq!(paths(dependencies(&e("0/U"), &plan)), ["system/blockMeshDict", "constant/transportProperties"]);
        assert_eq!(paths(dependencies(&e("system/fvSchemes"), &plan)), ["system/controlDict"]);
        assert_eq!(dependencies(&e("Allrun"), &plan).len(), 7);
        assert!(dependencies(&e("system/controlDict"), &plan).is_empty());
        assert!(dependencies(&e("system/blockMeshDict"), &plan).is_empty());
    }

    #[test]
    fn associated_text_lists_existing_dependencies() {
        let plan = plan_order(base_plan());
        let existing = vec![FoamFile::new(e("system/blockMeshDict"), "vertices ();\n")];
        let text = associated(&e("0/p"), &plan, &existing);
        assert!(text.starts_with("system/blockMeshDict:\nvertices ();"));
        assert_eq!(associated(&e("system/controlDict"), &plan, &existing), "None");
    }
}
