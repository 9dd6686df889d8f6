use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, SystemTime};

use super::{io_err, ExecRecord, ParaError, POST_DIR};
use crate::llm::ScriptedPostRun;
use crate::runner::run_with_timeout;

pub trait PostExecutor: Send + Sync {
    fn run(&self, case_dir: &Path, script: &Path) -> Result<ExecRecord, ParaError>;
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Replays scripted results; with no script, every run succeeds and saves
/// `postout/result.png`.
pub struct MockPostExecutor {
    runs: Vec<ScriptedPostRun>,
    next: Mutex<usize>,
}

impl MockPostExecutor {
    pub fn new(runs: Vec<ScriptedPostRun>) -> Self {
        Self { runs, next: Mutex::new(0) }
    }
}

impl PostExecutor for MockPostExecutor {
    fn run(&self, case_dir: &Path, _script: &Path) -> Result<ExecRecord, ParaError> {
        let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
        let scripted = match self.runs.get(*next).or(self.runs.last()) {
            Some(r) => r.clone(),
            None => ScriptedPostRun { exit_status: 0, output: String::new(), images: vec!["result.png".into()] },
        };
        *next += 1;
        let dir = case_dir.join(POST_DIR);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut images = Vec::new();
        for name in &scripted.images {
            let path = dir.join(name);
            fs::write(&path, PNG_SIGNATURE).map_err(io_err(&path))?;
            images.push(format!("{POST_DIR}/{name}"));
        }
        Ok(ExecRecord { exit_status: scripted.exit_status, output: scripted.output, images })
    }
}

/// Runs scripts with a batch interpreter such as `pvpython`.
#[derive(Debug, Clone)]
pub struct ProcessPostExecutor {
    interpreter: PathBuf,
    timeout: Duration,
}

fn on_path(name: &Path) -> bool {
    if name.components().count() > 1 {
        return name.is_file();
    }
    std::env::var_os("PATH")
        .map(|p| std::env::split_paths(&p).any(|d| d.join(name).is_file()))
        .unwrap_or(false)
}

impl ProcessPostExecutor {
    pub fn new(interpreter: impl Into<PathBuf>, timeout: Duration) -> Result<Self, ParaError> {
        let interpreter = interpreter.into();
        if interpreter.as_os_str().is_empty() || !on_path(&interpreter) {
            return Err(ParaError::ExecutorUnavailable(format!("interpreter {:?} not found", interpreter)));
        }
        Ok(Self { interpreter, timeout })
    }
}

fn images_since(dir: &Path, start: SystemTime) -> Vec<String> {
    let mut out: Vec<String> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter(|e| {
            let name = e.file_name().to_string_lossy().to_lowercase();
            let fresh = e.metadata().and_then(|m| m.modified()).map(|t| t >= start).unwrap_or(false);
            fresh && [".png", ".jpg", ".jpeg"].iter().any(|x| name.ends_with(x))
        })
        .map(|e| format!("{POST_DIR}/{}", e.file_name().to_string_lossy()))
        .collect();
    out.sort();
    out
}

impl PostExecutor for ProcessPostExecutor {
    fn run(&self, case_dir: &Path, script: &Path) -> Result<ExecRecord, ParaError> {
        let start = SystemTime::now() - Duration::from_secs(1);
        let mut cmd = Command::new(&self.interpreter);
        cmd.arg(script).current_dir(case_dir);
        let (output, status, timed_out) = run_with_timeout(cmd, self.timeout)
            .map_err(|e| ParaError::ExecutorUnavailable(format!("{}: {e}", self.interpreter.display())))?;
        let mut output = output;
        if timed_out {
            output.push_str(&format!("\ntimed out after {} s\n", self.timeout.as_secs()));
        }
        Ok(ExecRecord {
            exit_status: status.unwrap_or(-1),
            output,
            images: images_since(&case_dir.join(POST_DIR), start),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_fail_then_succeed() {
        let dir = tempfile::tempdir().unwrap();
        let m = MockPostExecutor::new(vec![
            ScriptedPostRun { exit_status: 1, output: "NameError: name 'Show' is not defined".into(), images: vec![] },
            ScriptedPostRun { exit_status: 0, output: String::new(), images: vec!["out.png".into()] },
        ]);
        let s = dir.path().join("s.py");
        let a = m.run(dir.path(), &s).unwrap();
        assert!(!a.succeeded() && a.images.is_empty());
        let b = m.run(dir.path(), &s).unwrap();
        assert_eq!(b.images, ["postout/out.png"]);
        assert!(dir.path().join("postout/out.png").is_file());
    }

    #[test]
    fn missing_interpreter() {
        let e = ProcessPostExecutor::new("definitely-not-a-pvpython-binary", Duration::from_secs(1));
        assert!(matches!(e, Err(ParaError::ExecutorUnavailable(_))));
    }

    #[test]
    fn process_executor_collects_images() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join(POST_DIR)).unwrap();
        let script = dir.path().join("post.sh");
        fs::write(&script, "echo plotting; printf x > postout/u.png\n").unwrap();
        let exec = ProcessPostExecutor::new("sh", Duration::from_secs(10)).unwrap();
        let r = exec.run(dir.path(), &script).unwrap();
        assert_eq!(r.exit_status, 0);
        assert!(r.output.contains("plotting"));
        assert_eq!(r.images, ["postout/u.png"]);
    }
}
