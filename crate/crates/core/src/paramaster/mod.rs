//! ParaMaster: writes and runs visualisation scripts until an image exists.

mod executor;

pub use executor::{MockPostExecutor, PostExecutor, ProcessPostExecutor};

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::foamcase::{clean_file, read_case, CaseError, Folder};
use crate::llm::{render_prompt, AgentRole, Gateway, LlmError, TemplateId};

pub const DEFAULT_POST_ATTEMPT_CAP: u32 = 10;
pub const POST_DIR: &str = "postout";
pub const CASE_FILE: &str = "case.foam";

#[derive(Debug, thiserror::Error)]
pub enum ParaError {
    #[error("post-processing executor unavailable: {0}")]
    ExecutorUnavailable(String),
    #[error("generated script was empty after cleaning")]
    EmptyAfterClean,
    #[error("I/O error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ParaError + '_ {
    move |source| ParaError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecRecord {
    pub exit_status: i32,
    pub output: String,
    /// Case-relative image paths under `postout/`.
    pub images: Vec<String>,
}

impl ExecRecord {
    pub fn succeeded(&self) -> bool {
        self.exit_status == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostScript {
    pub code: String,
    pub attempt: u32,
    pub last_exec: Option<ExecRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PostAction {
    WriteCode,
    RunCode,
    Done,
}

/// Picks the next action from the script history.
pub fn reason_next(history: &[PostScript], cap: u32) -> PostAction {
    let Some(last) = history.last() else {
        return PostAction::WriteCode;
    };
    match &last.last_exec {
        None => PostAction::RunCode,
        Some(r) if r.succeeded() && !r.images.is_empty() => PostAction::Done,
        Some(_) if last.attempt >= cap => PostAction::Done,
        Some(_) => PostAction::WriteCode,
    }
}

fn field_files(case_dir: &Path) -> Result<String, ParaError> {
    let names: Vec<String> = read_case(case_dir)?
        .iter()
        .filter(|f| f.entry.folder() == Folder::Zero)
        .map(|f| f.entry.filename().to_string())
        .collect();
    Ok(if names.is_empty() { "None".into() } else { names.join(", ") })
}

/// Writes a new script, or a repaired one when the history holds a failure.
pub fn write_code(task: &str, history: &[PostScript], case_dir: &Path, gateway: &Gateway) -> Result<PostScript, ParaError> {
    let mut b = HashMap::new();
    b.insert("case_file", case_dir.join(CASE_FILE).display().to_string());
    b.insert("output_dir", case_dir.join(POST_DIR).display().to_string());
    b.insert("post_task", task.to_string());
    b.insert("field_files", field_files(case_dir)?);
    let (id, purpose) = match history.last() {
        Some(prev) => {
            let exec = prev.last_exec.as_ref();
            let output = match exec {
                Some(r) if r.succeeded() => format!("exit status 0, but no image was saved\n{}", r.output),
                Some(r) => format!("exit status {}\n{}", r.exit_status, r.output),
                None => "not executed".into(),
            };
            b.insert("previous_code", prev.code.clone());
            b.insert("exec_output", output);
            (TemplateId::ParaReason, "ParaReason")
        }
        None => (TemplateId::ParaWrite, "ParaWrite"),
    };
    let prompt = render_prompt(id, &b)?;
    let reply = gateway.complete_text(AgentRole::ParaMaster, purpose, &prompt)?;
    let code = clean_file(&reply.text).map_err(|_| ParaError::EmptyAfterClean)?;
    Ok(PostScript { code, attempt: history.len() as u32 + 1, last_exec: None })
}

/// Saves the script under `postout/` and executes it.
pub fn run_code(script: &PostScript, case_dir: &Path, executor: &dyn PostExecutor) -> Result<ExecRecord, ParaError> {
    let out = case_dir.join(POST_DIR);
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let marker = case_dir.join(CASE_FILE);
    if !marker.exists() {
        fs::write(&marker, "").map_err(io_err(&marker))?;
    }
    let path = out.join(format!("script_{}.py", script.attempt));
    fs::write(&path, &script.code).map_err(io_err(&path))?;
    executor.run(case_dir, &path)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostOutcome {
    pub actions: Vec<PostAction>,
    pub history: Vec<PostScript>,
    /// True when the last script succeeded and saved at least one image.
    pub success: bool,
}

impl PostOutcome {
    pub fn images(&self) -> Vec<String> {
        match self.history.last().and_then(|s| s.last_exec.as_ref()) {
            Some(r) if self.success => r.images.clone(),
            _ => Vec::new(),
        }
    }
}

/// The write/run loop, bounded by `cap` scripts.
pub fn post_process(
    task: &str,
    case_dir: &Path,
    gateway: &Gateway,
    executor: &dyn PostExecutor,
    cap: u32,
) -> Result<PostOutcome, ParaError> {
    let mut history: Vec<PostScript> = Vec::new();
    let mut actions = Vec::new();
    loop {
        let action = reason_next(&history, cap);
        actions.push(action);
        match action {
            PostAction::WriteCode => history.push(write_code(task, &history, case_dir, gateway)?),
            PostAction::RunCode => {
                let last = history.last_mut().expect("RunCode follows WriteCode");
                last.last_exec = Some(run_code(last, case_dir, executor)?);
            }
            PostAction::Done => break,
        }
    }
    let success = matches!(
        history.last().and_then(|s| s.last_exec.as_ref()),
        Some(r) if r.succeeded() && !r.images.is_empty()
    );
    Ok(PostOutcome { actions, history, success })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script(attempt: u32, exec: Option<(i32, &[&str])>) -> PostScript {
        PostScript {
            code: "x".into(),
            attempt,
            last_exec: exec.map(|(s, imgs)| ExecRecord {
                exit_status: s,
                output: String::new(),
                images: imgs.iter().map(|s| s.to_string()).collect(),
            }),
        }
    }

    #[test]
    fn next_action() {
        assert_eq!(reason_next(&[], 10), PostAction::WriteCode);
        assert_eq!(reason_next(&[script(1, None)], 10), PostAction::RunCode);
        assert_eq!(reason_next(&[script(1, Some((0, &["postout/a.png"])))], 10), PostAction::Done);
        assert_eq!(reason_next(&[script(1, Some((1, &[])))], 10), PostAction::WriteCode);
        assert_eq!(reason_next(&[script(1, Some((0, &[])))], 10), PostAction::WriteCode);
        assert_eq!(reason_next(&[script(10, Some((1, &[])))], 10), PostAction::Done);
    }
}
