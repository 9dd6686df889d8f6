//! Prompt templates and `{placeholder}` rendering.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateId {
    ObserverPicture,
    DivideTasks,
    SetupFramework,
    WriteFoamFile,
    HandleError,
    ClassifyError,
    ParaWrite,
    ParaReason,
}

impl TemplateId {
    pub const ALL: [TemplateId; 8] = [
        TemplateId::ObserverPicture,
        TemplateId::DivideTasks,
        TemplateId::SetupFramework,
        TemplateId::WriteFoamFile,
        TemplateId::HandleError,
        TemplateId::ClassifyError,
        TemplateId::ParaWrite,
        TemplateId::ParaReason,
    ];

    pub fn body(self) -> &'static str {
        match self {
            TemplateId::ObserverPicture => include_str!("templates/observer_picture.txt"),
            TemplateId::DivideTasks => include_str!("templates/divide_tasks.txt"),
            TemplateId::SetupFramework => include_str!("templates/setup_framework.txt"),
            TemplateId::WriteFoamFile => include_str!("templates/write_foam_file.txt"),
            TemplateId::HandleError => include_str!("templates/handle_error.txt"),
            TemplateId::ClassifyError => include_str!("templates/classify_error.txt"),
            TemplateId::ParaWrite => include_str!("templates/para_write.txt"),
            TemplateId::ParaReason => include_str!("templates/para_reason.txt"),
        }
    }

    /// The declared binding set.
    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateId::ObserverPicture => &["cfd_example_describe", "reference"],
            TemplateId::DivideTasks => &["cfid_example_describe"],
            TemplateId::SetupFramework => &[
                "simulation_task",
                "physical_information",
                "geometrical_information",
                "solver_list",
                "similar_case",
            ],
            TemplateId::WriteFoamFile => &[
                "requirement",
                "CFD_task",
                "physical_information",
                "geometrical_information",
                "solver",
                "similar_file",
                "associated_file",
            ],
            TemplateId::HandleError => &["errors", "file_list"],
            TemplateId::ClassifyError => &["error_type", "errors", "file_list"],
            TemplateId::ParaWrite => &["case_file", "output_dir", "post_task", "field_files"],
            TemplateId::ParaReason => &[
                "case_file",
                "output_dir",
                "post_task",
                "field_files",
                "previous_code",
                "exec_output",
            ],
        }
    }

    /// The `<Output requirement>` section, quoted when re-asking for a well-formed reply.
    pub fn output_requirement(self) -> &'static str {
        let body = self.body();
        match body.find("<Output requirement>") {
            Some(i) => body[i + "<Output requirement>".len()..].trim(),
            None => "",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

fn slot_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap())
}

/// Placeholder names occurring in `body`, deduplicated.
pub fn placeholders_in(body: &str) -> BTreeSet<String> {
    slot_re().captures_iter(body).map(|c| c[1].to_string()).collect()
}

/// Single-pass substitution: text coming from a binding is never rescanned.
pub fn render_str(body: &str, bindings: &HashMap<&str, String>) -> Result<String, LlmError> {
    let mut out = String::with_capacity(body.len());
    let mut last = 0;
    for caps in slot_re().captures_iter(body) {
        let m = caps.get(0).unwrap();
        let name = &caps[1];
        let value = bindings
            .get(name)
            .ok_or_else(|| LlmError::MissingBinding(name.to_string()))?;
        out.push_str(&body[last..m.start()]);
        out.push_str(value);
        last = m.end();
    }
    out.push_str(&body[last..]);
    Ok(out)
}

pub fn render_prompt(id: TemplateId, bindings: &HashMap<&str, String>) -> Result<String, LlmError> {
    render_str(id.body(), bindings)
}
