//! Message bus and the workflow that moves a requirement through the agents.

mod bus;
mod message;
mod state;
mod workflow;

pub use bus::{read_trace, Bus, Dispatch};
pub use message::{
    DiagnosisPayload, FileInstructionPayload, Message, MessageKind, Payload, PostProcessRequestPayload,
    RunOutcomePayload, RunRequestPayload, TaskSplitPayload, TerminalPayload, UserRequirementPayload,
};
pub use state::{AblationConfig, Phase, WorkflowState};
pub use workflow::{run_workflow, Activation, WorkflowConfig, WorkflowDeps, WorkflowResult, DEFAULT_K_MAX};

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("payload does not match {kind}: {detail}")]
    SchemaMismatch { kind: MessageKind, detail: String },
    #[error("message id {got} out of sequence, expected {expected}")]
    DuplicateId { expected: u64, got: u64 },
    #[error("no undelivered message to dispatch")]
    Deadlock,
    #[error("illegal phase transition {from:?} -> {to:?}")]
    IllegalTransition { from: Phase, to: Phase },
    #[error("iteration cap {0} exceeded")]
    CapExceeded(u32),
    #[error("malformed trace: {0}")]
    Trace(String),
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl EnvError {
    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> EnvError + '_ {
        move |source| EnvError::Io { path: path.to_path_buf(), source }
    }
}
