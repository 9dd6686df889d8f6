//! Reviewer: turns a run outcome into one diagnosis, the post-processing
//! hand-off, or termination.

mod classify;
mod restore;

pub use classify::{classify_error, excerpt_paths, message_lines, normalize_type_word, parse_diagnosis_reply, ClassifiedType};
pub use restore::restore_state;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::foamcase::{list_case_files, CaseError, FilePlanEntry};
use crate::llm::{render_prompt, AgentRole, Gateway, LlmError, TemplateId};
use crate::perception::TaskSplit;
use crate::runner::{ErrorRecord, RunOutcome};

pub const BLOCKMESH_DICT: &str = "system/blockMeshDict";
pub const CONTROL_DICT: &str = "system/controlDict";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorType {
    FormatError,
    MissingFile,
    GeometryError,
    TimePrecisionError,
    Unknown,
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorDiagnosis {
    pub error_type: ErrorType,
    pub description: String,
    /// Case-relative; empty for `Unknown`.
    pub file_path: String,
}

impl ErrorDiagnosis {
    pub fn unknown(description: impl Into<String>) -> Self {
        Self { error_type: ErrorType::Unknown, description: description.into(), file_path: String::new() }
    }

    pub fn entry(&self) -> Option<FilePlanEntry> {
        self.file_path.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Review {
    NoError,
    Diagnosis(ErrorDiagnosis),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EndMark {
    PostProcess(String),
    Terminal,
}

#[derive(Debug, thiserror::Error)]
pub enum ReviewerError {
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("invalid reviewer pattern {pattern:?}: {source}")]
    Pattern { pattern: String, source: regex::Error },
    #[error("contract violation: {0}")]
    ContractViolation(String),
}

/// Patterns recognising a time-precision failure in a fatal excerpt. The
/// excerpt must match `required` and at least one of `any`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimePrecisionPatterns {
    pub required: String,
    pub any: Vec<String>,
}

impl Default for TimePrecisionPatterns {
    fn default() -> Self {
        Self {
            required: r"(?i)time".into(),
            any: vec![r"(?i)precision".into(), r"(?i)cannot find.*time director".into()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReviewerConfig {
    pub time_precision: TimePrecisionPatterns,
}

pub struct Reviewer {
    required: Regex,
    any: Vec<Regex>,
    checkmesh_failed: Regex,
}

fn compile(p: &str) -> Result<Regex, ReviewerError> {
    Regex::new(p).map_err(|source| ReviewerError::Pattern { pattern: p.to_string(), source })
}

fn has_fatal(log: &str) -> bool {
    log.contains("FOAM FATAL")
}

impl Reviewer {
    pub fn new(cfg: &ReviewerConfig) -> Result<Self, ReviewerError> {
        Ok(Self {
            required: compile(&cfg.time_precision.required)?,
            any: cfg.time_precision.any.iter().map(|p| compile(p)).collect::<Result<_, _>>()?,
            checkmesh_failed: Regex::new(r"Failed\s+\d*\s*mesh checks").unwrap(),
        })
    }

    pub fn is_time_precision(&self, excerpt: &str) -> bool {
        self.required.is_match(excerpt) && self.any.iter().any(|r| r.is_match(excerpt))
    }

    fn geometry(&self, outcome: &RunOutcome) -> Option<ErrorDiagnosis> {
        let description = match outcome.log("log.blockMesh") {
            None => "log.blockMesh does not exist: the mesh was never generated".to_string(),
            Some(log) if has_fatal(log) => {
                let msg = fatal_message(log);
                format!("blockMesh failed: {msg}")
            }
            Some(_) => {
                let log = outcome.log("log.checkMesh").filter(|l| self.checkmesh_failed.is_match(l))?;
                let line = self.checkmesh_failed.find(log).map(|m| m.as_str()).unwrap_or("Failed mesh checks");
                let extra = log.lines().find(|l| l.trim_start().starts_with("***")).map(str::trim).unwrap_or("");
                format!("checkMesh reported {line}. {extra}").trim().to_string()
            }
        };
        Some(ErrorDiagnosis {
            error_type: ErrorType::GeometryError,
            description,
            file_path: BLOCKMESH_DICT.into(),
        })
    }

    /// Algorithm for one failed or successful run. Mutates the case only in
    /// the last tier, through [`restore_state`].
    pub fn handle_error(&self, outcome: &RunOutcome, case_dir: &Path, gateway: &Gateway) -> Result<Review, ReviewerError> {
        if outcome.success {
            return Ok(Review::NoError);
        }
        if outcome.command_sequence.is_empty() {
            let allrun = case_dir.join("Allrun");
            let first = outcome.errors.first().map(|e| message_lines(&e.excerpt)).unwrap_or_default();
            let (error_type, description) = if allrun.is_file() {
                (ErrorType::FormatError, format!("Allrun does not run any OpenFOAM application. {first}"))
            } else {
                (ErrorType::MissingFile, format!("Allrun is missing. {first}"))
            };
            restore_state(case_dir)?;
            return Ok(Review::Diagnosis(ErrorDiagnosis {
                error_type,
                description: description.trim().to_string(),
                file_path: "Allrun".into(),
            }));
        }
        if let Some(d) = self.geometry(outcome) {
            restore_state(case_dir)?;
            return Ok(Review::Diagnosis(d));
        }
        if let Some(e) = outcome.errors.iter().find(|e| self.is_time_precision(&e.excerpt)) {
            restore_state(case_dir)?;
            return Ok(Review::Diagnosis(ErrorDiagnosis {
                error_type: ErrorType::TimePrecisionError,
                description: message_lines(&e.excerpt),
                file_path: CONTROL_DICT.into(),
            }));
        }
        restore_state(case_dir)?;
        let Some(first) = outcome.errors.first() else {
            return Ok(Review::Diagnosis(ErrorDiagnosis::unknown("the run failed without an error message")));
        };
        let files = list_case_files(case_dir)?;
        let diag = match classify_error(first, &files, gateway)? {
            ClassifiedType::Unknown => ErrorDiagnosis::unknown(message_lines(&first.excerpt)),
            ClassifiedType::MissingFile => self.missing_file(first, &files, gateway)?,
            ClassifiedType::FormatError => self.format_error(first, &files, gateway)?,
        };
        Ok(Review::Diagnosis(diag))
    }

    fn locate(&self, err: &ErrorRecord, error_type: &str, files: &[String], gateway: &Gateway) -> Result<Option<(String, String)>, ReviewerError> {
        let mut b = HashMap::new();
        b.insert("error_type", error_type.to_string());
        b.insert("errors", err.excerpt.trim().to_string());
        b.insert("file_list", files.join("\n"));
        let prompt = render_prompt(TemplateId::ClassifyError, &b)?;
        let reply = gateway.complete_text(AgentRole::Reviewer, "DiagnoseError", &prompt)?;
        Ok(parse_diagnosis_reply(&reply.text))
    }

    fn missing_file(&self, err: &ErrorRecord, files: &[String], gateway: &Gateway) -> Result<ErrorDiagnosis, ReviewerError> {
        let message = message_lines(&err.excerpt);
        let path = match excerpt_paths(&err.excerpt).into_iter().next() {
            Some(p) => Some(p),
            None => self.locate(err, "Missing file", files, gateway)?.map(|(f, _)| f),
        };
        Ok(match path.filter(|p| p.parse::<FilePlanEntry>().is_ok()) {
            Some(file_path) => ErrorDiagnosis { error_type: ErrorType::MissingFile, description: message, file_path },
            None => ErrorDiagnosis::unknown(message),
        })
    }

    fn format_error(&self, err: &ErrorRecord, files: &[String], gateway: &Gateway) -> Result<ErrorDiagnosis, ReviewerError> {
        let message = message_lines(&err.excerpt);
        let parsed = excerpt_paths(&err.excerpt).into_iter().find(|p| files.contains(p));
        let located = self.locate(err, "format error", files, gateway)?;
        let (llm_file, reason) = match located {
            Some((f, r)) => (Some(f).filter(|f| files.contains(f)), r),
            None => (None, String::new()),
        };
        let description = if reason.is_empty() { message } else { format!("{message}\n{reason}") };
        Ok(match llm_file.or(parsed) {
            Some(file_path) => ErrorDiagnosis { error_type: ErrorType::FormatError, description, file_path },
            None => ErrorDiagnosis::unknown(description),
        })
    }
}

fn fatal_message(log: &str) -> String {
    match log.find("--> FOAM FATAL") {
        Some(i) => message_lines(&log[i..]),
        None => String::new(),
    }
}

/// Success path: hand the post-processing task on, or finish.
pub fn end_mark(outcome: &RunOutcome, task: &TaskSplit) -> Result<EndMark, ReviewerError> {
    if !outcome.success {
        return Err(ReviewerError::ContractViolation("end_mark called on a failed run".into()));
    }
    Ok(match &task.post_processing_task {
        Some(t) => EndMark::PostProcess(t.clone()),
        None => EndMark::Terminal,
    })
}
