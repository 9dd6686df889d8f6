use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::dict::parse_dict;
use super::{FoamFile, Folder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InconsistencyKind {
    BoundaryNameMismatch,
    DimensionMismatch,
    MissingKeyword,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inconsistency {
    pub kind: InconsistencyKind,
    pub file_a: String,
    /// Second file for cross-file kinds; `None` for a keyword missing from `file_a` itself.
    pub file_b: Option<String>,
    pub detail: String,
}

const BLOCK_MESH_DICT: &str = "system/blockMeshDict";

/// Cross-checks a field file against the rest of the case.
///
/// Reports patch names in a `0/` file that blockMeshDict does not define,
/// `0/` files without a `dimensions` entry, and differing dimensions between
/// a field and its `.orig` copy.
pub fn check_dependencies(target: &FoamFile, case_files: &[FoamFile]) -> Vec<Inconsistency> {
    let mut out = Vec::new();
    if target.entry.folder() != Folder::Zero {
        return out;
    }
    let target_path = target.entry.rel_path();
    let parsed = parse_dict(&target.content);

    if !parsed.has_keyword("dimensions") {
        out.push(Inconsistency {
            kind: InconsistencyKind::MissingKeyword,
            file_a: target_path.clone(),
            file_b: None,
            detail: "keyword 'dimensions' is undefined".to_string(),
        });
    }

    let mesh = case_files
        .iter()
        .find(|f| f.entry.rel_path() == BLOCK_MESH_DICT)
        .map(|f| parse_dict(&f.content));
    if let Some(mesh) = mesh.filter(|m| !m.boundary_names.is_empty()) {
        for name in &parsed.boundary_names {
            if !patch_covered(name, &mesh.boundary_names) {
                out.push(Inconsistency {
                    kind: InconsistencyKind::BoundaryNameMismatch,
                    file_a: target_path.clone(),
                    file_b: Some(BLOCK_MESH_DICT.to_string()),
                    detail: format!(
                        "patch '{name}' is not defined in blockMeshDict (defined: {})",
                        mesh.boundary_names.iter().cloned().collect::<Vec<_>>().join(", ")
                    ),
                });
            }
        }
    }

    if let Some(dims) = parsed.dimensions {
        let base = field_base_name(target.entry.filename());
        let others: BTreeMap<String, [i32; 7]> = case_files
            .iter()
            .filter(|f| f.entry.folder() == Folder::Zero && f.entry != target.entry)
            .filter(|f| field_base_name(f.entry.filename()) == base)
            .filter_map(|f| parse_dict(&f.content).dimensions.map(|d| (f.entry.rel_path(), d)))
            .collect();
        for (path, other) in others {
            if other != dims {
                out.push(Inconsistency {
                    kind: InconsistencyKind::DimensionMismatch,
                    file_a: target_path.clone(),
                    file_b: Some(path),
                    detail: format!("dimensions {dims:?} differ from {other:?}"),
                });
            }
        }
    }
    out
}

fn field_base_name(name: &str) -> &str {
    name.strip_suffix(".orig").unwrap_or(name)
}

/// Patch entries may be regular expressions such as `"(left|right)"` or `".*"`.
pub(crate) fn patch_covered(name: &str, defined: &std::collections::BTreeSet<String>) -> bool {
    if defined.contains(name) {
        return true;
    }
    if name.chars().any(|c| matches!(c, '*' | '|' | '(' | ')' | '.' | '[' | '+' | '?')) {
        if let Ok(re) = Regex::new(&format!("^(?:{name})$")) {
            return defined.iter().any(|d| re.is_match(d));
        }
    }
    defined
        .iter()
        .filter(|d| d.chars().any(|c| matches!(c, '*' | '|' | '(')))
        .any(|d| Regex::new(&format!("^(?:{d})$")).map(|re| re.is_match(name)).unwrap_or(false))
}
