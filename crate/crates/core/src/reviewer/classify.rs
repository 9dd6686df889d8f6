use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;

use super::ReviewerError;
use crate::llm::{render_prompt, AgentRole, Gateway, TemplateId};
use crate::runner::ErrorRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifiedType {
    FormatError,
    MissingFile,
    Unknown,
}

pub fn normalize_type_word(reply: &str) -> ClassifiedType {
    let t: String = reply
        .trim()
        .to_lowercase()
        .chars()
        .filter(|c| !matches!(c, '"' | '\'' | '`' | '.'))
        .collect();
    match t.trim() {
        "format error" => ClassifiedType::FormatError,
        "missing file" | "missing error" => ClassifiedType::MissingFile,
        _ => ClassifiedType::Unknown,
    }
}

/// Asks which of the two error kinds the first error is.
pub fn classify_error(first_err: &ErrorRecord, file_list: &[String], gateway: &Gateway) -> Result<ClassifiedType, ReviewerError> {
    let mut b = HashMap::new();
    b.insert("errors", first_err.excerpt.trim().to_string());
    b.insert("file_list", file_list.join("\n"));
    let prompt = render_prompt(TemplateId::HandleError, &b)?;
    let reply = gateway.complete_text(AgentRole::Reviewer, "HandleError", &prompt)?;
    Ok(normalize_type_word(&reply.text))
}

/// The lines stating the error, without the marker and the source trace.
pub fn message_lines(excerpt: &str) -> String {
    let mut lines = excerpt.lines().skip_while(|l| !l.contains("--> FOAM"));
    let mut out = Vec::new();
    if let Some(marker) = lines.next() {
        let rest = marker.split_once("ERROR:").or_else(|| marker.split_once("Warning")).map(|(_, r)| r.trim());
        if let Some(r) = rest.filter(|r| !r.is_empty() && *r != ":") {
            out.push(r.trim_start_matches(':').trim().to_string());
        }
    }
    for line in lines {
        let t = line.trim();
        if t.is_empty() {
            if out.is_empty() {
                continue;
            }
            break;
        }
        if t.starts_with("From function") || t.starts_with("FOAM exiting") || t.starts_with("FOAM aborting") {
            break;
        }
        out.push(t.to_string());
    }
    if out.is_empty() {
        excerpt.trim().lines().next().unwrap_or("").trim().to_string()
    } else {
        out.join("\n")
    }
}

fn quoted_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#""([^"\n]+)"|file:\s*(\S+)"#).unwrap())
}

fn case_path(raw: &str) -> Option<String> {
    let segs: Vec<&str> = raw.split('/').filter(|s| !s.is_empty()).collect();
    if segs.last() == Some(&"Allrun") {
        return Some("Allrun".into());
    }
    let i = segs.iter().rposition(|s| matches!(*s, "0" | "system" | "constant"))?;
    let name = segs.get(i + 1)?.trim_end_matches(['.', ':', ',']);
    (!name.is_empty()).then(|| format!("{}/{}", segs[i], name))
}

/// Case-relative paths named in the excerpt, quoted ones first.
pub fn excerpt_paths(excerpt: &str) -> Vec<String> {
    let mut quoted = Vec::new();
    let mut files = Vec::new();
    for c in quoted_re().captures_iter(excerpt) {
        if let Some(q) = c.get(1) {
            quoted.extend(case_path(q.as_str()));
        } else if let Some(f) = c.get(2) {
            files.extend(case_path(f.as_str()));
        }
    }
    let mut out: Vec<String> = Vec::new();
    for p in quoted.into_iter().chain(files) {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Reads `file:` and `reason:` lines.
pub fn parse_diagnosis_reply(text: &str) -> Option<(String, String)> {
    let mut file = None;
    let mut reason = None;
    for line in text.lines() {
        let t = line.trim().trim_start_matches(['-', '*', ' ']);
        let lower = t.to_ascii_lowercase();
        if lower.starts_with("file:") && file.is_none() {
            let v = t[5..].trim().trim_matches(|c| matches!(c, '"' | '`' | '\'' | '.'));
            file = Some(v.trim_start_matches("./").to_string());
        } else if lower.starts_with("reason:") && reason.is_none() {
            reason = Some(t[7..].trim().to_string());
        }
    }
    let file = file.filter(|f| !f.is_empty())?;
    Some((file, reason.unwrap_or_default()))
}
