//! Collects fatal and warning blocks from command logs.

use serde::{Deserialize, Serialize};

use super::{ErrorRecord, RunLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Fatal,
    Warning,
}

pub const FATAL_MARKERS: [&str; 2] = ["FOAM FATAL IO ERROR", "FOAM FATAL ERROR"];
pub const WARNING_MARKER: &str = "--> FOAM Warning";

fn is_fatal(line: &str) -> bool {
    FATAL_MARKERS.iter().any(|m| line.contains(m))
}

fn is_warning(line: &str) -> bool {
    line.contains(WARNING_MARKER)
}

fn is_terminator(line: &str) -> bool {
    line.contains("FOAM exiting") || line.contains("FOAM aborting")
}

/// Blocks of one log as `(line offset, severity, text)`.
fn blocks(content: &str) -> Vec<(usize, Severity, String)> {
    let lines: Vec<&str> = content.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if is_fatal(line) {
            let start = i;
            i += 1;
            while i < lines.len() && !is_fatal(lines[i]) && !is_warning(lines[i]) {
                i += 1;
                if is_terminator(lines[i - 1]) {
                    break;
                }
            }
            out.push((start, Severity::Fatal, lines[start..i].join("\n").trim_end().to_string()));
        } else if is_warning(line) {
            let start = i;
            i += 1;
            let mut content_seen = false;
            while i < lines.len() && !is_fatal(lines[i]) && !is_warning(lines[i]) {
                if lines[i].trim().is_empty() {
                    if content_seen {
                        break;
                    }
                } else {
                    content_seen = true;
                }
                i += 1;
            }
            out.push((start, Severity::Warning, lines[start..i].join("\n").trim_end().to_string()));
        } else {
            i += 1;
        }
    }
    out
}

/// Fatal blocks in (log order, offset) order, then warnings in the same order.
pub fn extract_errors(logs: &[RunLog]) -> Vec<ErrorRecord> {
    let mut found: Vec<(Severity, usize, usize, String, String)> = Vec::new();
    for (li, log) in logs.iter().enumerate() {
        for (offset, sev, text) in blocks(&log.content) {
            found.push((sev, li, offset, log.name.clone(), text));
        }
    }
    found.sort_by_key(|f| (f.0, f.1, f.2));
    found
        .into_iter()
        .enumerate()
        .map(|(ordinal, (severity, _, offset, source_log, excerpt))| ErrorRecord {
            source_log,
            excerpt,
            ordinal,
            offset,
            severity,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(name: &str, content: &str) -> RunLog {
        RunLog { name: name.into(), content: content.into() }
    }

    const FATAL_FILE: &str = "Create time\n\n\n--> FOAM FATAL IO ERROR: \ncannot find file \"$FOAM_CASE/0/p\"\n\n    From function readStream\n    in file IOstream.C at line 10.\n\nFOAM exiting\n\n";

    #[test]
    fn clean_logs() {
        assert!(extract_errors(&[log("log.blockMesh", "End\n")]).is_empty());
        assert!(extract_errors(&[]).is_empty());
    }

    #[test]
    fn fatal_block_bounds() {
        let errs = extract_errors(&[log("log.icoFoam", FATAL_FILE)]);
        assert_eq!(errs.len(), 1);
        assert!(errs[0].excerpt.starts_with("--> FOAM FATAL IO ERROR"));
        assert!(errs[0].excerpt.contains("cannot find file \"$FOAM_CASE/0/p\""));
        assert!(errs[0].excerpt.ends_with("FOAM exiting"));
        assert_eq!(errs[0].offset, 3);
    }

    #[test]
    fn command_order_then_warnings() {
        let warn = "--> FOAM Warning : \n    From function x\n    Reading \"a\"\n\nExecution continues\n";
        let logs = [
            log("log.blockMesh", &format!("{warn}--> FOAM FATAL ERROR: \nbad vertex\nFOAM exiting\n")),
            log("log.simpleFoam", FATAL_FILE),
        ];
        let errs = extract_errors(&logs);
        let got: Vec<_> = errs.iter().map(|e| (e.ordinal, e.source_log.as_str(), e.severity)).collect();
        assert_eq!(
            got,
            [
                (0, "log.blockMesh", Severity::Fatal),
                (1, "log.simpleFoam", Severity::Fatal),
                (2, "log.blockMesh", Severity::Warning),
            ]
        );
        assert!(!errs[2].excerpt.contains("Execution continues"));
    }

    #[test]
    fn unterminated_block_runs_to_end() {
        let errs = extract_errors(&[log("log.x", "--> FOAM FATAL ERROR:\nline a\nline b")]);
        assert_eq!(errs[0].excerpt, "--> FOAM FATAL ERROR:\nline a\nline b");
    }
}
