//! Executes a case's Allrun script command by command and gathers the logs.

mod allrun;
mod extract;
mod faux;
mod profiles;
mod subprocess;

pub use allrun::{parse_allrun, AllrunCommand, AllrunScript, CommandKind, SHELL_UTILITIES};
pub use extract::{extract_errors, Severity, FATAL_MARKERS, WARNING_MARKER};
pub use faux::FauxFoam;
pub use profiles::{ConstantRequirement, SolverProfile, SolverProfiles, UtilityProfile, BUILTIN_PROFILES};
pub use subprocess::{SubprocessExecutor, DEFAULT_COMMAND_TIMEOUT};
pub(crate) use subprocess::run_with_timeout;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::foamcase::parse_dict;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("case has no Allrun script at {0}")]
    MissingExecutionScript(PathBuf),
    #[error("executor unavailable: {0}")]
    ExecutorUnavailable(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLog {
    pub name: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub source_log: String,
    pub excerpt: String,
    pub ordinal: usize,
    /// Line of the block start within its log.
    pub offset: usize,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub success: bool,
    pub command_sequence: Vec<String>,
    /// In command order.
    pub logs: Vec<RunLog>,
    pub errors: Vec<ErrorRecord>,
}

impl RunOutcome {
    pub fn log(&self, name: &str) -> Option<&str> {
        self.logs.iter().find(|l| l.name == name).map(|l| l.content.as_str())
    }

    /// The outcome reported when Allrun is absent.
    pub fn missing_script() -> Self {
        let excerpt = "--> FOAM FATAL ERROR: \ncannot find file \"$FOAM_CASE/Allrun\"\n\nFOAM exiting".to_string();
        Self {
            success: false,
            command_sequence: Vec::new(),
            logs: Vec::new(),
            errors: vec![ErrorRecord {
                source_log: "Allrun".into(),
                excerpt,
                ordinal: 0,
                offset: 0,
                severity: Severity::Fatal,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandResult {
    /// Log text for applications; `None` for shell utilities.
    pub log: Option<String>,
    pub success: bool,
}

pub trait Executor: Send + Sync {
    fn name(&self) -> &str;
    fn execute(&self, case_dir: &Path, cmd: &AllrunCommand) -> Result<CommandResult, RunnerError>;
}

/// Fatal block for a command that failed without printing one.
pub fn synthetic_fatal(command: &str, reason: &str) -> String {
    format!("\n\n--> FOAM FATAL ERROR: \ncommand '{command}' {reason} without a FOAM error message\n\nFOAM exiting\n\n")
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io { path: path.to_path_buf(), source }
}

fn remove_stale_logs(case_dir: &Path) -> Result<(), RunnerError> {
    for entry in fs::read_dir(case_dir).map_err(io(case_dir))? {
        let entry = entry.map_err(io(case_dir))?;
        let name = entry.file_name();
        if name.to_string_lossy().starts_with("log.") && entry.path().is_file() {
            fs::remove_file(entry.path()).map_err(io(case_dir))?;
        }
    }
    Ok(())
}

pub fn run_case(case_dir: &Path, executor: &dyn Executor) -> Result<RunOutcome, RunnerError> {
    let allrun = case_dir.join("Allrun");
    if !allrun.is_file() {
        return Err(RunnerError::MissingExecutionScript(allrun));
    }
    let script_text = fs::read_to_string(&allrun).map_err(io(&allrun))?;
    remove_stale_logs(case_dir)?;
    let application = fs::read_to_string(case_dir.join("system/controlDict"))
        .ok()
        .and_then(|t| parse_dict(&t).word("application").map(str::to_string));
    let script = parse_allrun(&script_text, application.as_deref());

    let mut command_sequence = Vec::new();
    let mut logs = Vec::new();
    let mut failed = false;
    for cmd in &script.commands {
        let result = executor.execute(case_dir, cmd)?;
        log::debug!("{} {} -> {}", executor.name(), cmd.name, result.success);
        if let (Some(name), Some(content)) = (&cmd.log_name, result.log) {
            let path = case_dir.join(name);
            fs::write(&path, &content).map_err(io(&path))?;
            command_sequence.push(cmd.name.clone());
            logs.push(RunLog { name: name.clone(), content });
        }
        if !result.success {
            failed = true;
            if script.stop_on_error {
                break;
            }
        }
    }
    let mut errors = extract_errors(&logs);
    let has_fatal = errors.iter().any(|e| e.severity == Severity::Fatal);
    if command_sequence.is_empty() {
        failed = true;
        errors.insert(
            0,
            ErrorRecord {
                source_log: "Allrun".into(),
                excerpt: "--> FOAM FATAL ERROR: \nAllrun does not launch any OpenFOAM application\n\nFOAM exiting".into(),
                ordinal: 0,
                offset: 0,
                severity: Severity::Fatal,
            },
        );
        for (i, e) in errors.iter_mut().enumerate() {
            e.ordinal = i;
        }
    }
    let success = !failed && !has_fatal;
    if success {
        errors.clear();
    }
    Ok(RunOutcome {
        success,
        command_sequence,
        logs,
        errors,
    })
}
