use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ask_parsed, PerceptionError, PerceptionReport, TaskSplit};
use crate::foamcase::{base_plan, plan_order, FilePlanEntry, StructuredCaseInfo};
use crate::knowledge::{Category, KnowledgeBase};
use crate::llm::{render_prompt, AgentRole, Gateway, TemplateId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CasePlan {
    pub info: StructuredCaseInfo,
    pub entries: Vec<FilePlanEntry>,
}

const LABELS: [&str; 6] = [
    "case name:",
    "case domain:",
    "case solver:",
    "case category:",
    "solver description:",
    "case files:",
];

fn parse_entries(list: &str) -> Vec<FilePlanEntry> {
    list.split(|c: char| c.is_whitespace() || c == ',')
        .map(|w| w.trim_matches(|c: char| matches!(c, '"' | '\'' | '`' | '.' | ';')))
        .filter(|w| !w.is_empty() && *w != "None")
        .filter_map(|w| w.parse().ok())
        .collect()
}

/// Reads the five labelled lines and the optional `case files:` line.
pub fn parse_case_info(text: &str) -> Option<(StructuredCaseInfo, Vec<FilePlanEntry>)> {
    let mut values: [Option<String>; 6] = Default::default();
    for line in text.lines() {
        let line = line.trim().trim_start_matches(['-', '*', ' ']);
        let lower = line.to_ascii_lowercase();
        for (i, label) in LABELS.iter().enumerate() {
            if lower.starts_with(label) && values[i].is_none() {
                let v = line[label.len()..].trim().trim_matches(|c| c == '"' || c == '`').trim();
                values[i] = Some(v.to_string());
            }
        }
    }
    let field = |i: usize| values[i].clone().filter(|v| !v.is_empty());
    let info = StructuredCaseInfo {
        case_name: field(0)?,
        case_domain: field(1)?,
        case_solver: field(2)?.split_whitespace().next()?.to_string(),
        case_category: field(3)?,
        solver_description: field(4)?,
    };
    let files = values[5].as_deref().map(parse_entries).unwrap_or_default();
    Some((info, files))
}

fn path_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?:^|[\s"'(,/|])((?:0|system|constant)/[A-Za-z][A-Za-z0-9_.]*|Allrun)\b"#).unwrap()
    })
}

/// Case file paths named in a case-structure document.
pub fn structure_paths(text: &str) -> Vec<FilePlanEntry> {
    path_re()
        .captures_iter(text)
        .filter_map(|c| c[1].trim_end_matches('.').parse::<FilePlanEntry>().ok())
        .filter(|e| !matches!(e.filename(), "polyMesh" | "triSurface" | "geometry"))
        .collect()
}

fn mentions_word(text: &str, word: &str) -> bool {
    Regex::new(&format!(r"(?i)\b{}\b", regex::escape(word)))
        .map(|re| re.is_match(text))
        .unwrap_or(false)
}

/// Union of the base set, the model's extra files and the retrieved
/// structure, the latter only when it uses the same solver.
pub fn merge_plan(
    info: &StructuredCaseInfo,
    llm_files: &[FilePlanEntry],
    structure: Option<&str>,
) -> Result<Vec<FilePlanEntry>, PerceptionError> {
    let mut set: BTreeSet<FilePlanEntry> = base_plan().into_iter().collect();
    set.extend(llm_files.iter().cloned());
    if let Some(text) = structure.filter(|t| mentions_word(t, &info.case_solver)) {
        set.extend(structure_paths(text));
    }
    let entries = plan_order(set);
    for base in base_plan() {
        if !entries.contains(&base) {
            return Err(PerceptionError::PlanEmpty(base.rel_path()));
        }
    }
    Ok(entries)
}

pub fn setup_framework(
    task: &TaskSplit,
    report: &PerceptionReport,
    gateway: &Gateway,
    kb: &KnowledgeBase,
) -> Result<CasePlan, PerceptionError> {
    let similar = kb.retrieve(&task.simulation_task, Category::CaseStruct)?;
    gateway.record_retrieval(AgentRole::Architect, "Retrieve:CaseStruct");
    let none = || "None".to_string();
    let mut b = HashMap::new();
    b.insert("simulation_task", task.simulation_task.clone());
    b.insert("physical_information", report.physical_description.clone().unwrap_or_else(none));
    b.insert("geometrical_information", report.geometric_description.clone().unwrap_or_else(none));
    b.insert("solver_list", kb.solver_list());
    b.insert("similar_case", similar.joined_text());
    let prompt = render_prompt(TemplateId::SetupFramework, &b)?;
    let (info, llm_files) = ask_parsed(
        gateway,
        AgentRole::Architect,
        "SetupFramework",
        TemplateId::SetupFramework,
        &prompt,
        None,
        parse_case_info,
    )?;
    let query = format!("{} {} {} {}", info.case_solver, info.case_name, info.case_domain, info.case_category);
    let top = kb.retrieve_top(&query, Category::CaseStruct, 1)?;
    gateway.record_retrieval(AgentRole::Architect, "Retrieve:CaseStruct");
    let structure = top.hits.first().map(|h| h.chunk.text.as_str());
    let entries = merge_plan(&info, &llm_files, structure)?;
    Ok(CasePlan { info, entries })
}
