use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::foamcase::StructuredCaseInfo;
use crate::llm::AgentRole;
use crate::perception::{PerceptionReport, TaskSplit};
use crate::reviewer::ErrorDiagnosis;
use crate::runner::ErrorRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    UserRequirement,
    TaskSplit,
    FileInstruction,
    RunRequest,
    RunOutcomeMsg,
    Diagnosis,
    PostProcessRequest,
    Terminal,
}

impl MessageKind {
    pub const ALL: [MessageKind; 8] = [
        MessageKind::UserRequirement,
        MessageKind::TaskSplit,
        MessageKind::FileInstruction,
        MessageKind::RunRequest,
        MessageKind::RunOutcomeMsg,
        MessageKind::Diagnosis,
        MessageKind::PostProcessRequest,
        MessageKind::Terminal,
    ];

    /// The one role that reacts to this kind; `Terminal` has none.
    pub fn subscriber(self) -> Option<AgentRole> {
        match self {
            MessageKind::UserRequirement => Some(AgentRole::Observer),
            MessageKind::TaskSplit => Some(AgentRole::Architect),
            MessageKind::FileInstruction | MessageKind::Diagnosis => Some(AgentRole::InputWriter),
            MessageKind::RunRequest => Some(AgentRole::Runner),
            MessageKind::RunOutcomeMsg => Some(AgentRole::Reviewer),
            MessageKind::PostProcessRequest => Some(AgentRole::ParaMaster),
            MessageKind::Terminal => None,
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRequirementPayload {
    pub requirement: String,
    /// SHA-256 of the attached image, if any.
    pub image_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSplitPayload {
    pub requirement: String,
    pub split: TaskSplit,
    pub report: PerceptionReport,
    /// Set when the image bypasses observation and goes to the writer.
    pub forwarded_image: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileInstructionPayload {
    pub file: String,
    pub index: usize,
    pub total: usize,
    pub info: StructuredCaseInfo,
    pub plan: Vec<String>,
    pub image_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequestPayload {
    pub round: u32,
    pub changed_files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOutcomePayload {
    pub round: u32,
    pub success: bool,
    pub command_sequence: Vec<String>,
    pub errors: Vec<ErrorRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosisPayload {
    pub round: u32,
    pub diagnosis: ErrorDiagnosis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostProcessRequestPayload {
    pub post_task: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalPayload {
    pub success: bool,
    pub k_used: u32,
    pub reason: String,
    pub images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    UserRequirement(UserRequirementPayload),
    TaskSplit(TaskSplitPayload),
    FileInstruction(FileInstructionPayload),
    RunRequest(RunRequestPayload),
    RunOutcomeMsg(RunOutcomePayload),
    Diagnosis(DiagnosisPayload),
    PostProcessRequest(PostProcessRequestPayload),
    Terminal(TerminalPayload),
}

fn decode<T: DeserializeOwned>(kind: MessageKind, v: &serde_json::Value) -> Result<T, EnvError> {
    T::deserialize(v).map_err(|e| EnvError::SchemaMismatch { kind, detail: e.to_string() })
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::UserRequirement(_) => MessageKind::UserRequirement,
            Payload::TaskSplit(_) => MessageKind::TaskSplit,
            Payload::FileInstruction(_) => MessageKind::FileInstruction,
            Payload::RunRequest(_) => MessageKind::RunRequest,
            Payload::RunOutcomeMsg(_) => MessageKind::RunOutcomeMsg,
            Payload::Diagnosis(_) => MessageKind::Diagnosis,
            Payload::PostProcessRequest(_) => MessageKind::PostProcessRequest,
            Payload::Terminal(_) => MessageKind::Terminal,
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        let v = match self {
            Payload::UserRequirement(p) => serde_json::to_value(p),
            Payload::TaskSplit(p) => serde_json::to_value(p),
            Payload::FileInstruction(p) => serde_json::to_value(p),
            Payload::RunRequest(p) => serde_json::to_value(p),
            Payload::RunOutcomeMsg(p) => serde_json::to_value(p),
            Payload::Diagnosis(p) => serde_json::to_value(p),
            Payload::PostProcessRequest(p) => serde_json::to_value(p),
            Payload::Terminal(p) => serde_json::to_value(p),
        };
        v.expect("payload types serialise")
    }

    /// Decodes `value` with the schema fixed by `kind`.
    pub fn from_value(kind: MessageKind, value: &serde_json::Value) -> Result<Self, EnvError> {
        Ok(match kind {
            MessageKind::UserRequirement => Payload::UserRequirement(decode(kind, value)?),
            MessageKind::TaskSplit => Payload::TaskSplit(decode(kind, value)?),
            MessageKind::FileInstruction => Payload::FileInstruction(decode(kind, value)?),
            MessageKind::RunRequest => Payload::RunRequest(decode(kind, value)?),
            MessageKind::RunOutcomeMsg => Payload::RunOutcomeMsg(decode(kind, value)?),
            MessageKind::Diagnosis => Payload::Diagnosis(decode(kind, value)?),
            MessageKind::PostProcessRequest => Payload::PostProcessRequest(decode(kind, value)?),
            MessageKind::Terminal => Payload::Terminal(decode(kind, value)?),
        })
    }
}

/// One trace record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    pub id: u64,
    pub kind: MessageKind,
    pub sender: AgentRole,
    pub case_id: String,
    pub payload: serde_json::Value,
}

impl Message {
    pub fn new(id: u64, sender: AgentRole, case_id: impl Into<String>, payload: &Payload) -> Self {
        Self { id, kind: payload.kind(), sender, case_id: case_id.into(), payload: payload.to_value() }
    }

    pub fn decode(&self) -> Result<Payload, EnvError> {
        Payload::from_value(self.kind, &self.payload)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages serialise")
    }
}
