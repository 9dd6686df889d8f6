//! Reads an Allrun script into the ordered list of commands it launches.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    /// An OpenFOAM application; writes `log.<name>`.
    Application,
    /// A shell helper such as `cp` or `restore0Dir`; no log.
    Utility,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllrunCommand {
    pub line: usize,
    pub kind: CommandKind,
    pub name: String,
    pub args: Vec<String>,
    pub log_name: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AllrunScript {
    pub commands: Vec<AllrunCommand>,
    /// `set -e` present: stop at the first failing command.
    pub stop_on_error: bool,
}

pub const SHELL_UTILITIES: &[&str] = &[
    "cp", "mv", "rm", "mkdir", "ln", "touch", "echo", "cat", "sed", "chmod", "restore0Dir",
    "cleanCase", "foamCleanTutorials", "foamCleanCase", "foamDictionary", "true",
];

const SKIPPED: &[&str] = &[
    "cd", ".", "source", "set", "export", "unset", "if", "then", "else", "elif", "fi", "for", "do",
    "done", "while", "case", "esac", "{", "}", "shift", "wait", "exit", "return",
];

fn redirect_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\s*(?:[0-9]?>>?|&>|<)\s*(?:&[0-9]|[^\s|;&]+)").unwrap())
}

/// Drops `> file`, `2>&1`, pipes into `tee` and background markers.
fn strip_redirections(stmt: &str) -> String {
    let head = stmt.split('|').next().unwrap_or("");
    redirect_re().replace_all(head, "").trim_end_matches('&').trim().to_string()
}

fn split_statements(line: &str) -> Vec<String> {
    line.split("&&")
        .flat_map(|s| s.split(';'))
        .flat_map(|s| s.split("||"))
        .flat_map(|s| s.split(" & "))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn resolve(word: &str, vars: &HashMap<String, String>, application: Option<&str>) -> String {
    let w = word.trim_matches('"').trim_matches('\'');
    if w == "$(getApplication)" || w == "`getApplication`" {
        return application.unwrap_or(w).to_string();
    }
    if let Some(name) = w.strip_prefix('$') {
        let name = name.trim_start_matches('{').trim_end_matches('}');
        if let Some(v) = vars.get(name) {
            return v.clone();
        }
    }
    w.to_string()
}

/// `application` substitutes `$(getApplication)`.
pub fn parse_allrun(script: &str, application: Option<&str>) -> AllrunScript {
    let mut out = AllrunScript::default();
    let mut vars: HashMap<String, String> = HashMap::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in script.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let line = match line.find(" #") {
            Some(p) => line[..p].trim(),
            None => line,
        };
        for stmt in split_statements(line) {
            let words: Vec<String> = strip_redirections(&stmt).split_whitespace().map(str::to_string).collect();
            let Some(first) = words.first() else { continue };
            if first == "set" && words.iter().any(|w| w.starts_with('-') && w.contains('e') && !w.starts_with("--")) {
                out.stop_on_error = true;
                continue;
            }
            if SKIPPED.contains(&first.as_str()) {
                continue;
            }
            if let Some((name, value)) = first.split_once('=') {
                if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    vars.insert(name.to_string(), resolve(value, &vars, application));
                    continue;
                }
            }
            let (kind, name, args) = if first == "runApplication" || first == "runParallel" {
                let mut rest = words[1..].iter();
                let mut suffix = None;
                let mut app = None;
                while let Some(w) = rest.next() {
                    match w.as_str() {
                        "-s" | "-suffix" => suffix = rest.next().cloned(),
                        "-np" => {
                            rest.next();
                        }
                        f if f.starts_with('-') => {}
                        _ => {
                            app = Some(resolve(w, &vars, application));
                            break;
                        }
                    }
                }
                let Some(app) = app else { continue };
                let args: Vec<String> = rest.map(|w| resolve(w, &vars, application)).collect();
                let name = match suffix {
                    Some(s) => format!("{app}.{s}"),
                    None => app,
                };
                (CommandKind::Application, name, args)
            } else {
                let name = resolve(first, &vars, application);
                let args = words[1..].iter().map(|w| resolve(w, &vars, application)).collect();
                let kind = if SHELL_UTILITIES.contains(&name.as_str()) {
                    CommandKind::Utility
                } else {
                    CommandKind::Application
                };
                (kind, name, args)
            };
            let log_name = (kind == CommandKind::Application).then(|| {
                let n = seen.entry(name.clone()).or_insert(0);
                *n += 1;
                if *n == 1 {
                    format!("log.{name}")
                } else {
                    format!("log.{name}.{n}")
                }
            });
            out.commands.push(AllrunCommand {
                line: i + 1,
                kind,
                name,
                args,
                log_name,
            });
        }
    }
    out
}

impl AllrunCommand {
    /// Executable name without any `-s` suffix.
    pub fn program(&self) -> &str {
        match self.kind {
            CommandKind::Application => self.name.split('.').next().unwrap_or(&self.name),
            CommandKind::Utility => &self.name,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAVITY: &str = "#!/bin/sh\ncd ${0%/*} || exit 1    # Run from this directory\n\n# Source tutorial run functions\n. $WM_PROJECT_DIR/bin/tools/RunFunctions\n\nrunApplication blockMesh\nrunApplication $(getApplication)\n";

    #[test]
    fn tutorial_script() {
        let s = parse_allrun(CAVITY, Some("icoFoam"));
        let names: Vec<_> = s.commands.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["blockMesh", "icoFoam"]);
        assert_eq!(s.commands[1].log_name.as_deref(), Some("log.icoFoam"));
        assert!(!s.stop_on_error);
    }

    #[test]
    fn plain_commands_with_redirection() {
        let s = parse_allrun(
            "#!/bin/bash\nset -e\napp=pisoFoam\ncp -r 0.orig 0\nblockMesh > log.blockMesh 2>&1\ncheckMesh | tee log.checkMesh\n$app>log.run\n",
            None,
        );
        assert!(s.stop_on_error);
        let got: Vec<_> = s.commands.iter().map(|c| (c.name.as_str(), c.kind)).collect();
        assert_eq!(
            got,
            [
                ("cp", CommandKind::Utility),
                ("blockMesh", CommandKind::Application),
                ("checkMesh", CommandKind::Application),
                ("pisoFoam", CommandKind::Application),
            ]
        );
        assert_eq!(s.commands[0].args, ["-r", "0.orig", "0"]);
        assert!(s.commands[1].args.is_empty());
    }

    #[test]
    fn suffix_and_repeats() {
        let s = parse_allrun(
            "runApplication -s fine blockMesh\nrunApplication topoSet\nrunApplication -o topoSet -dict system/b\n",
            None,
        );
        let logs: Vec<_> = s.commands.iter().map(|c| c.log_name.clone().unwrap()).collect();
        assert_eq!(logs, ["log.blockMesh.fine", "log.topoSet", "log.topoSet.2"]);
        assert_eq!(s.commands[0].program(), "blockMesh");
        assert_eq!(s.commands[2].args, ["-dict", "system/b"]);
    }

    #[test]
    fn chained_statements() {
        let s = parse_allrun("blockMesh && icoFoam", None);
        assert_eq!(s.commands.len(), 2);
        assert!(parse_allrun("", None).commands.is_empty());
    }
}
