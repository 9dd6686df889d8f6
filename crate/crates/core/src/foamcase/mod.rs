//! OpenFOAM case model: file plan ordering, reply cleaning, dictionary
//! parsing, cross-file checks and the on-disk layout.

mod clean;
mod deps;
pub mod dict;
mod layout;
mod plan;

use std::path::PathBuf;

pub use clean::{clean_file, is_clean, INPUT_FILE_MARKER};
pub use deps::{check_dependencies, Inconsistency, InconsistencyKind};
pub(crate) use deps::patch_covered;
pub use dict::{parse_dict, FoamDict};
pub use layout::{file_path, list_case_files, read_case, write_case, write_file, FoamFile};
pub use plan::{base_plan, plan_order, FilePlanEntry, Folder};

use serde::{Deserialize, Serialize};

/// The five labelled facts the planner extracts from a requirement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuredCaseInfo {
    pub case_name: String,
    pub case_domain: String,
    pub case_solver: String,
    pub case_category: String,
    pub solver_description: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error("invalid case file path '{0}'")]
    InvalidPath(String),
    #[error("generated file is empty after cleaning")]
    EmptyAfterClean,
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
