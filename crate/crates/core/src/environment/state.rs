use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Planning,
    Writing,
    Running,
    Reviewing,
    PostProcessing,
    Done,
    Failed,
}

impl Phase {
    pub fn is_final(self) -> bool {
        matches!(self, Phase::Done | Phase::Failed)
    }

    /// Edges of the workflow graph. Staying in a phase is always allowed
    /// for non-final phases; any non-final phase may fail.
    pub fn can_transition(self, to: Phase) -> bool {
        use Phase::*;
        if self.is_final() {
            return false;
        }
        if self == to || to == Failed {
            return true;
        }
        matches!(
            (self, to),
            (Planning, Writing)
                | (Writing, Running)
                | (Running, Reviewing)
                | (Reviewing, Writing)
                | (Reviewing, PostProcessing)
                | (Reviewing, Done)
                | (PostProcessing, Done)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Method 1 when true; with false the raw image goes to the writer.
    pub observe_picture_enabled: bool,
    pub reviewer_enabled: bool,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self { observe_picture_enabled: true, reviewer_enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowState {
    pub case_id: String,
    pub case_dir: PathBuf,
    pub k: u32,
    pub k_max: u32,
    pub phase: Phase,
    pub ablation: AblationConfig,
}

impl WorkflowState {
    pub fn new(case_id: impl Into<String>, case_dir: PathBuf, k_max: u32, ablation: AblationConfig) -> Self {
        Self { case_id: case_id.into(), case_dir, k: 0, k_max, phase: Phase::Planning, ablation }
    }

    pub fn advance(&mut self, to: Phase) -> Result<(), EnvError> {
        if !self.phase.can_transition(to) {
            return Err(EnvError::IllegalTransition { from: self.phase, to });
        }
        self.phase = to;
        Ok(())
    }

    pub fn cap_reached(&self) -> bool {
        self.k >= self.k_max
    }

    /// Starts a correction round.
    pub fn begin_round(&mut self) -> Result<u32, EnvError> {
        if self.cap_reached() {
            return Err(EnvError::CapExceeded(self.k_max));
        }
        self.k += 1;
        Ok(self.k)
    }
}
