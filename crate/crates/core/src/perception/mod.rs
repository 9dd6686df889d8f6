//! Observer and Architect: read the requirement (and image), split it into
//! tasks and plan the case files.

mod architect;
mod observer;

pub use architect::{merge_plan, parse_case_info, setup_framework, structure_paths, CasePlan};
pub use observer::{divide_task, observe_picture, parse_perception, parse_task_split, PerceptionReport, TaskSplit};

use crate::knowledge::KnowledgeError;
use crate::llm::{AgentRole, Gateway, Image, LlmError, TemplateId};

#[derive(Debug, thiserror::Error)]
pub enum PerceptionError {
    #[error("requirement is empty")]
    EmptyRequirement,
    #[error("{purpose} reply does not follow the output format after one re-ask: {reply:?}")]
    ResponseFormat { purpose: String, reply: String },
    #[error("case plan lacks base file {0}")]
    PlanEmpty(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

/// Sentence appended when a reply misses its markers.
pub fn corrective_suffix(id: TemplateId) -> String {
    format!(
        "\n\nYour previous reply did not follow the output requirement. Reply again and follow it exactly:\n{}\n",
        id.output_requirement()
    )
}

/// Calls the gateway, parses the reply, and re-asks once on a parse failure.
pub(crate) fn ask_parsed<T>(
    gateway: &Gateway,
    role: AgentRole,
    purpose: &str,
    id: TemplateId,
    prompt: &str,
    image: Option<&Image>,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<T, PerceptionError> {
    let call = |p: &str| match image {
        Some(img) => gateway.complete_multimodal(role, purpose, p, img),
        None => gateway.complete_text(role, purpose, p),
    };
    let first = call(prompt)?;
    if let Some(v) = parse(&first.text) {
        return Ok(v);
    }
    log::warn!("{purpose}: reply missing markers, re-asking");
    let second = call(&format!("{prompt}{}", corrective_suffix(id)))?;
    parse(&second.text).ok_or_else(|| PerceptionError::ResponseFormat {
        purpose: purpose.to_string(),
        reply: second.text,
    })
}
