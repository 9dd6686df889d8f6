//! Runs real OpenFOAM applications as child processes.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::{synthetic_fatal, AllrunCommand, CommandKind, CommandResult, Executor, RunnerError, FATAL_MARKERS};

pub const DEFAULT_COMMAND_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone)]
pub struct SubprocessExecutor {
    timeout: Duration,
    /// Shell used for utilities; OpenFOAM's RunFunctions are sourced first.
    shell: String,
}

impl SubprocessExecutor {
    /// Requires an OpenFOAM environment (`WM_PROJECT_DIR`).
    pub fn new(timeout: Duration) -> Result<Self, RunnerError> {
        match std::env::var("WM_PROJECT_DIR") {
            Ok(v) if !v.is_empty() => Ok(Self::unchecked(timeout)),
            _ => Err(RunnerError::ExecutorUnavailable(
                "WM_PROJECT_DIR is not set; source the OpenFOAM environment first".into(),
            )),
        }
    }

    /// Skips the environment check.
    pub fn unchecked(timeout: Duration) -> Self {
        Self {
            timeout,
            shell: "bash".into(),
        }
    }
}

/// Output (stdout then stderr), exit code, and whether the timeout fired.
pub(crate) fn run_with_timeout(mut command: Command, timeout: Duration) -> Result<(String, Option<i32>, bool), std::io::Error> {
    let mut child = command.stdout(Stdio::piped()).stderr(Stdio::piped()).stdin(Stdio::null()).spawn()?;
    let mut out = child.stdout.take().expect("piped stdout");
    let mut err = child.stderr.take().expect("piped stderr");
    let out_reader = thread::spawn(move || {
        let mut s = Vec::new();
        let _ = out.read_to_end(&mut s);
        s
    });
    let err_reader = thread::spawn(move || {
        let mut s = Vec::new();
        let _ = err.read_to_end(&mut s);
        s
    });
    let start = Instant::now();
    let (status, timed_out) = loop {
        if let Some(status) = child.try_wait()? {
            break (status.code(), false);
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            break (None, true);
        }
        thread::sleep(Duration::from_millis(20));
    };
    let mut text = String::from_utf8_lossy(&out_reader.join().unwrap_or_default()).into_owned();
    text.push_str(&String::from_utf8_lossy(&err_reader.join().unwrap_or_default()));
    Ok((text, status, timed_out))
}

impl Executor for SubprocessExecutor {
    fn name(&self) -> &str {
        "subprocess"
    }

    fn execute(&self, case_dir: &Path, cmd: &AllrunCommand) -> Result<CommandResult, RunnerError> {
        if cmd.kind == CommandKind::Utility {
            let line = std::iter::once(cmd.name.as_str())
                .chain(cmd.args.iter().map(String::as_str))
                .collect::<Vec<_>>()
                .join(" ");
            let mut c = Command::new(&self.shell);
            c.arg("-c")
                .arg(format!(". \"$WM_PROJECT_DIR/bin/tools/RunFunctions\" 2>/dev/null; {line}"))
                .current_dir(case_dir);
            let ok = matches!(run_with_timeout(c, self.timeout), Ok((_, Some(0), false)));
            return Ok(CommandResult { log: None, success: ok });
        }
        let program = cmd.program();
        let mut c = Command::new(program);
        c.args(&cmd.args).current_dir(case_dir);
        let (mut log, success) = match run_with_timeout(c, self.timeout) {
            Err(e) => (format!("{program}: {e}\n{}", synthetic_fatal(program, "could not be started")), false),
            Ok((text, _, true)) => {
                let reason = format!("timed out after {} s", self.timeout.as_secs());
                (format!("{text}{}", synthetic_fatal(program, &reason)), false)
            }
            Ok((text, Some(0), false)) => (text, true),
            Ok((text, code, false)) => {
                let has_marker = FATAL_MARKERS.iter().any(|m| text.contains(m));
                if has_marker {
                    (text, false)
                } else {
                    let reason = match code {
                        Some(c) => format!("exited with status {c}"),
                        None => "was killed by a signal".to_string(),
                    };
                    (format!("{text}{}", synthetic_fatal(program, &reason)), false)
                }
            }
        };
        if !log.ends_with('\n') {
            log.push('\n');
        }
        Ok(CommandResult { log: Some(log), success })
    }
}
