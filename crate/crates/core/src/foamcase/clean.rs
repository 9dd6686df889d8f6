use regex::Regex;
use std::sync::OnceLock;

use super::CaseError;

pub const INPUT_FILE_MARKER: &str = "The input file is:";

fn fence_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^```[ \t]*[A-Za-z0-9_+.\-]*[ \t]*\r?$").unwrap())
}

/// Strips code fences and the `The input file is:` marker from a model reply.
///
/// Rules, applied until nothing changes: leading blank lines, a leading
/// marker, a leading fence line (three backticks plus an optional language
/// word), a trailing fence. Everything else is kept byte for byte.
pub fn clean_file(raw: &str) -> Result<String, CaseError> {
    let mut text = raw.to_string();
    loop {
        let next = clean_once(&text);
        if next == text {
            break;
        }
        text = next;
    }
    if text.trim().is_empty() {
        return Err(CaseError::EmptyAfterClean);
    }
    Ok(text)
}

/// True when `clean_file` would leave the text untouched.
pub fn is_clean(text: &str) -> bool {
    matches!(clean_file(text), Ok(c) if c == text)
}

fn clean_once(text: &str) -> String {
    let mut s = drop_leading_blank_lines(text);

    if let Some(rest) = s.strip_prefix("```") {
        if rest.trim_start().starts_with(INPUT_FILE_MARKER) {
            s = rest.trim_start();
        }
    }
    if let Some(rest) = s.strip_prefix(INPUT_FILE_MARKER) {
        s = rest.strip_prefix(' ').unwrap_or(rest);
        s = s.strip_prefix("\r\n").or_else(|| s.strip_prefix('\n')).unwrap_or(s);
    }

    let first_end = s.find('\n').unwrap_or(s.len());
    if fence_line().is_match(&s[..first_end]) {
        s = if first_end < s.len() { &s[first_end + 1..] } else { "" };
    }

    strip_trailing_fence(s)
}

fn drop_leading_blank_lines(text: &str) -> &str {
    let mut s = text;
    loop {
        match s.find('\n') {
            Some(i) if s[..i].trim().is_empty() => s = &s[i + 1..],
            _ => return s,
        }
    }
}

fn strip_trailing_fence(s: &str) -> String {
    let body = s.trim_end();
    if !body.ends_with("```") {
        return s.to_string();
    }
    let without = &body[..body.len() - 3];
    let last_line_start = without.rfind('\n').map(|i| i + 1).unwrap_or(0);
    if without[last_line_start..].trim().is_empty() {
        // fence on its own line: drop it together with the preceding newline
        let cut = without[..last_line_start].trim_end_matches(['\n', '\r']);
        let cut_len = cut.len();
        // keep indentation-only content from vanishing if the whole body was a fence
        without[..cut_len].to_string()
    } else {
        without.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_language_fence() {
        assert_eq!(clean_file("```foam\nFoamFile{…}\n```").unwrap(), "FoamFile{…}");
    }

    #[test]
    fn clean_dict_is_unchanged() {
        let text = "FoamFile\n{\n    version 2.0;\n}\n\nconvertToMeters 0.1;\n";
        assert_eq!(clean_file(text).unwrap(), text);
        assert!(is_clean(text));
    }

    #[test]
    fn strips_marker_then_fence() {
        assert_eq!(clean_file("The input file is:\n```\nditto\n```").unwrap(), "ditto");
    }

    #[test]
    fn strips_marker_inside_fence() {
        assert_eq!(clean_file("```The input file is:\nditto\n```").unwrap(), "ditto");
        assert_eq!(clean_file("```\nThe input file is:\nditto\n```").unwrap(), "ditto");
        assert_eq!(clean_file("```The input file is:ditto```").unwrap(), "ditto");
    }

    #[test]
    fn leading_blank_lines_removed() {
        assert_eq!(clean_file("\n\n  \nfoo;\n").unwrap(), "foo;\n");
    }

    #[test]
    fn empty_generation() {
        assert!(matches!(clean_file("```\n```"), Err(CaseError::EmptyAfterClean)));
        assert!(matches!(clean_file("   \n"), Err(CaseError::EmptyAfterClean)));
        assert!(matches!(clean_file("The input file is:\n"), Err(CaseError::EmptyAfterClean)));
    }

    #[test]
    fn inner_backticks_preserved() {
        let text = "a ``` b\nc;\n";
        assert_eq!(clean_file(text).unwrap(), text);
    }
}
