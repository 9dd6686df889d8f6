use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ask_parsed, PerceptionError};
use crate::knowledge::{Category, KnowledgeBase};
use crate::llm::{render_prompt, AgentRole, Gateway, Image, TemplateId};

pub const GEOMETRIC_MARKER: &str = "Geometric description:";
pub const PHYSICAL_MARKER: &str = "Physical description:";
pub const SIMULATION_MARKER: &str = "simulation tasks:";
pub const POST_MARKER: &str = "post-processing tasks:";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionReport {
    pub geometric_description: Option<String>,
    pub physical_description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSplit {
    pub simulation_task: String,
    pub post_processing_task: Option<String>,
}

fn section(text: &str) -> Option<String> {
    let t = text
        .trim()
        .trim_matches(|c| c == '\'' || c == '`' || c == '"')
        .trim();
    (!t.is_empty() && t != "None").then(|| t.to_string())
}

/// Splits on the two markers; `None` when either is absent or out of order.
fn two_sections<'a>(text: &'a str, first: &str, second: &str) -> Option<(&'a str, &'a str)> {
    let a = text.find(first)?;
    let b = text[a..].find(second)? + a;
    Some((&text[a + first.len()..b], &text[b + second.len()..]))
}

pub fn parse_perception(text: &str) -> Option<PerceptionReport> {
    let (geo, phys) = two_sections(text, GEOMETRIC_MARKER, PHYSICAL_MARKER)?;
    Some(PerceptionReport {
        geometric_description: section(geo),
        physical_description: section(phys),
    })
}

pub fn parse_task_split(text: &str) -> Option<TaskSplit> {
    let (sim, post) = two_sections(text, SIMULATION_MARKER, POST_MARKER)?;
    Some(TaskSplit {
        simulation_task: section(sim)?,
        post_processing_task: section(post),
    })
}

/// Pre-parses the image into text. Without an image, or when disabled, no
/// call is made and both fields are `None`.
pub fn observe_picture(
    requirement: &str,
    image: Option<&Image>,
    enabled: bool,
    gateway: &Gateway,
    kb: &KnowledgeBase,
) -> Result<PerceptionReport, PerceptionError> {
    if requirement.trim().is_empty() {
        return Err(PerceptionError::EmptyRequirement);
    }
    let Some(image) = image.filter(|_| enabled) else {
        return Ok(PerceptionReport::default());
    };
    let reference = kb.retrieve(&format!("{requirement} blockMeshDict vertices"), Category::InputFiles)?;
    gateway.record_retrieval(AgentRole::Observer, "Retrieve:InputFiles");
    let mut b = HashMap::new();
    b.insert("cfd_example_describe", requirement.to_string());
    b.insert("reference", reference.joined_text());
    let prompt = render_prompt(TemplateId::ObserverPicture, &b)?;
    ask_parsed(
        gateway,
        AgentRole::Observer,
        "ObservePicture",
        TemplateId::ObserverPicture,
        &prompt,
        Some(image),
        parse_perception,
    )
}

pub fn divide_task(requirement: &str, gateway: &Gateway) -> Result<TaskSplit, PerceptionError> {
    if requirement.trim().is_empty() {
        return Err(PerceptionError::EmptyRequirement);
    }
    let mut b = HashMap::new();
    b.insert("cfid_example_describe", requirement.to_string());
    let prompt = render_prompt(TemplateId::DivideTasks, &b)?;
    ask_parsed(
        gateway,
        AgentRole::Observer,
        "DivideTask",
        TemplateId::DivideTasks,
        &prompt,
        None,
        parse_task_split,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_split_with_none() {
        let t = parse_task_split(
            "The tasks is as follows:'''\nsimulation tasks: simulate the cavity\n\npost-processing tasks: None'''",
        )
        .unwrap();
        assert_eq!(t.simulation_task, "simulate the cavity");
        assert_eq!(t.post_processing_task, None);
    }

    #[test]
    fn task_split_both() {
        let t = parse_task_split("simulation tasks: dam break\npost-processing tasks: plot alpha.water").unwrap();
        assert_eq!(t.post_processing_task.as_deref(), Some("plot alpha.water"));
    }

    #[test]
    fn markers_are_case_sensitive() {
        assert!(parse_task_split("Simulation tasks: x\nPost-processing tasks: y").is_none());
        assert!(parse_task_split("simulation tasks: None\npost-processing tasks: y").is_none());
        assert!(parse_perception("geometric description: a\nphysical description: b").is_none());
    }

    #[test]
    fn perception_sections() {
        let r = parse_perception(
            "The information of the example picture is as follows:\nGeometric description: rectangle 1200 by 400, left side Inlet\nPhysical description: None",
        )
        .unwrap();
        assert!(r.geometric_description.unwrap().contains("1200"));
        assert_eq!(r.physical_description, None);
    }
}
