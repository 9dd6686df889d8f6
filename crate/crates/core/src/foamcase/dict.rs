//! Tolerant reader for OpenFOAM dictionary files.
//!
//! Not a full grammar. It recovers the keyword tree, the patch names of a
//! `boundary`/`boundaryField`/`patches` section and the `dimensions` vector.
//! Malformed input never fails: problems are recorded as diagnostics and
//! `parse_complete` is cleared.

use std::collections::BTreeSet;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FoamToken {
    Word(String),
    Str(String),
    /// Verbatim `#{ ... #}` code block.
    Code(String),
    List { open: char, items: Vec<FoamToken> },
    Dict(Vec<FoamEntry>),
}

impl FoamToken {
    pub fn as_word(&self) -> Option<&str> {
        match self {
            FoamToken::Word(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FoamValue {
    Dict(Vec<FoamEntry>),
    Stream(Vec<FoamToken>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoamEntry {
    pub keyword: String,
    /// Quoted keywords are regular expressions in OpenFOAM.
    pub quoted: bool,
    pub value: FoamValue,
}

impl FoamEntry {
    /// Whether this entry's keyword matches `name`, honouring quoted regex keys.
    pub fn matches(&self, name: &str) -> bool {
        if self.keyword == name {
            return true;
        }
        if self.quoted {
            if let Ok(re) = Regex::new(&format!("^(?:{})$", self.keyword)) {
                return re.is_match(name);
            }
        }
        false
    }

    pub fn as_dict(&self) -> Option<&[FoamEntry]> {
        match &self.value {
            FoamValue::Dict(d) => Some(d),
            FoamValue::Stream(_) => None,
        }
    }
}

/// Parsed view of a dictionary file.
#[derive(Debug, Clone, PartialEq)]
pub struct FoamDict {
    pub entries: Vec<FoamEntry>,
    pub boundary_names: BTreeSet<String>,
    pub dimensions: Option<[i32; 7]>,
    pub parse_complete: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl FoamDict {
    pub fn get(&self, keyword: &str) -> Option<&FoamEntry> {
        find(&self.entries, keyword)
    }

    pub fn has_keyword(&self, keyword: &str) -> bool {
        self.get(keyword).is_some()
    }

    /// Top-level keywords in file order.
    pub fn keywords(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.keyword.as_str()).collect()
    }

    /// Follows nested dictionaries, e.g. `["solvers", "p"]`.
    pub fn lookup(&self, path: &[&str]) -> Option<&FoamEntry> {
        let (first, rest) = path.split_first()?;
        let mut cur = self.get(first)?;
        for key in rest {
            cur = find(cur.as_dict()?, key)?;
        }
        Some(cur)
    }

    /// Words of a scalar entry such as `application icoFoam;`.
    pub fn word(&self, keyword: &str) -> Option<&str> {
        match &self.get(keyword)?.value {
            FoamValue::Stream(tokens) => tokens.first().and_then(FoamToken::as_word),
            FoamValue::Dict(_) => None,
        }
    }
}

fn find<'a>(entries: &'a [FoamEntry], keyword: &str) -> Option<&'a FoamEntry> {
    // later entries override earlier ones, exact keys beat patterns
    entries
        .iter()
        .rev()
        .find(|e| e.keyword == keyword)
        .or_else(|| entries.iter().rev().find(|e| e.matches(keyword)))
}

pub fn parse_dict(content: &str) -> FoamDict {
    let (tokens, mut diagnostics) = lex(content);
    if tokens.is_empty() && diagnostics.is_empty() {
        diagnostics.push(Diagnostic { line: 1, col: 1, message: "no dictionary content".into() });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        diagnostics: Vec::new(),
    };
    let entries = parser.entries(false);
    diagnostics.append(&mut parser.diagnostics);
    diagnostics.sort_by_key(|d| (d.line, d.col));

    let boundary_names = extract_boundary_names(&entries);
    let dimensions = find(&entries, "dimensions").and_then(extract_dimensions);
    FoamDict {
        parse_complete: diagnostics.is_empty(),
        entries,
        boundary_names,
        dimensions,
        diagnostics,
    }
}

fn extract_boundary_names(entries: &[FoamEntry]) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    if let Some(FoamValue::Dict(d)) = find(entries, "boundaryField").map(|e| &e.value) {
        names.extend(
            d.iter()
                .filter(|e| !e.keyword.starts_with('#'))
                .map(|e| e.keyword.clone()),
        );
        return names;
    }
    if let Some(FoamValue::Stream(tokens)) = find(entries, "boundary").map(|e| &e.value) {
        if let Some(FoamToken::List { items, .. }) = tokens.iter().find(|t| matches!(t, FoamToken::List { .. })) {
            for pair in items.windows(2) {
                if let (FoamToken::Word(name) | FoamToken::Str(name), FoamToken::Dict(_)) = (&pair[0], &pair[1]) {
                    names.insert(name.clone());
                }
            }
        }
        return names;
    }
    if let Some(FoamValue::Stream(tokens)) = find(entries, "patches").map(|e| &e.value) {
        if let Some(FoamToken::List { items, .. }) = tokens.first() {
            // legacy form: type name ( faces )
            for triple in items.windows(3) {
                if let (FoamToken::Word(_), FoamToken::Word(name), FoamToken::List { .. }) =
                    (&triple[0], &triple[1], &triple[2])
                {
                    names.insert(name.clone());
                }
            }
        }
    }
    names
}

fn extract_dimensions(entry: &FoamEntry) -> Option<[i32; 7]> {
    let FoamValue::Stream(tokens) = &entry.value else {
        return None;
    };
    let items = tokens.iter().find_map(|t| match t {
        FoamToken::List { open: '[', items } => Some(items),
        _ => None,
    })?;
    let nums: Option<Vec<i32>> = items
        .iter()
        .map(|t| t.as_word().and_then(|w| w.parse::<i32>().ok()))
        .collect();
    let nums = nums?;
    // five-entry vectors omit the last two base units
    match nums.len() {
        7 => Some([nums[0], nums[1], nums[2], nums[3], nums[4], nums[5], nums[6]]),
        5 => Some([nums[0], nums[1], nums[2], nums[3], nums[4], 0, 0]),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Lex {
    Word(String),
    Str(String),
    Code(String),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Lex,
    line: usize,
    col: usize,
}

fn is_punct(c: char) -> bool {
    matches!(c, '{' | '}' | '(' | ')' | '[' | ']' | ';')
}

fn lex(src: &str) -> (Vec<Spanned>, Vec<Diagnostic>) {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut diags = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c.is_whitespace() {
            bump!();
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            let mut closed = false;
            while i < chars.len() {
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    closed = true;
                    break;
                }
                bump!();
            }
            if !closed {
                diags.push(Diagnostic { line: l0, col: c0, message: "unterminated block comment".into() });
            }
        } else if c == '"' {
            bump!();
            let mut s = String::new();
            let mut closed = false;
            while i < chars.len() {
                let ch = chars[i];
                if ch == '\\' && i + 1 < chars.len() {
                    s.push(ch);
                    bump!();
                    s.push(chars[i]);
                    bump!();
                    continue;
                }
                if ch == '"' {
                    bump!();
                    closed = true;
                    break;
                }
                s.push(ch);
                bump!();
            }
            if !closed {
                diags.push(Diagnostic { line: l0, col: c0, message: "unterminated string".into() });
            }
            out.push(Spanned { tok: Lex::Str(s), line: l0, col: c0 });
        } else if c == '#' && chars.get(i + 1) == Some(&'{') {
            bump!();
            bump!();
            let mut s = String::new();
            let mut closed = false;
            while i < chars.len() {
                if chars[i] == '#' && chars.get(i + 1) == Some(&'}') {
                    bump!();
                    bump!();
                    closed = true;
                    break;
                }
                s.push(chars[i]);
                bump!();
            }
            if !closed {
                diags.push(Diagnostic { line: l0, col: c0, message: "unterminated #{ code block".into() });
            }
            out.push(Spanned { tok: Lex::Code(s), line: l0, col: c0 });
        } else if is_punct(c) {
            out.push(Spanned { tok: Lex::Punct(c), line: l0, col: c0 });
            bump!();
        } else {
            let mut s = String::new();
            while i < chars.len() {
                let ch = chars[i];
                if ch.is_whitespace() || is_punct(ch) || ch == '"' {
                    break;
                }
                if ch == '/' && matches!(chars.get(i + 1), Some('/') | Some('*')) {
                    break;
                }
                s.push(ch);
                bump!();
            }
            out.push(Spanned { tok: Lex::Word(s), line: l0, col: c0 });
        }
    }
    (out, diags)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    diagnostics: Vec<Diagnostic>,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.tokens.get(self.pos)
    }

    fn diag_here(&mut self, message: &str) {
        let (line, col) = match self.tokens.get(self.pos).or(self.tokens.last()) {
            Some(t) => (t.line, t.col),
            None => (1, 1),
        };
        self.diagnostics.push(Diagnostic { line, col, message: message.to_string() });
    }

    fn entries(&mut self, nested: bool) -> Vec<FoamEntry> {
        let mut entries = Vec::new();
        loop {
            let Some(tok) = self.peek().cloned() else {
                if nested {
                    self.diag_here("missing '}' before end of file");
                }
                return entries;
            };
            match tok.tok {
                Lex::Punct('}') => {
                    if nested {
                        self.pos += 1;
                        return entries;
                    }
                    self.diag_here("unmatched '}'");
                    self.pos += 1;
                }
                Lex::Punct(';') => self.pos += 1,
                Lex::Punct(p) => {
                    self.diag_here(&format!("unexpected '{p}' where a keyword was expected"));
                    // recover by swallowing a stream up to the next ';'
                    let tokens = self.stream();
                    entries.push(FoamEntry {
                        keyword: String::new(),
                        quoted: false,
                        value: FoamValue::Stream(tokens),
                    });
                }
                Lex::Word(ref w) | Lex::Str(ref w) => {
                    let quoted = matches!(tok.tok, Lex::Str(_));
                    let keyword = w.clone();
                    self.pos += 1;
                    if keyword.starts_with('#') && !quoted {
                        entries.push(self.directive(keyword, tok.line));
                        continue;
                    }
                    let value = match self.peek().map(|t| t.tok.clone()) {
                        Some(Lex::Punct('{')) => {
                            self.pos += 1;
                            FoamValue::Dict(self.entries(true))
                        }
                        _ => FoamValue::Stream(self.stream()),
                    };
                    entries.push(FoamEntry { keyword, quoted, value });
                }
                Lex::Code(_) => {
                    self.diag_here("code block without a keyword");
                    self.pos += 1;
                }
            }
        }
    }

    fn directive(&mut self, keyword: String, line: usize) -> FoamEntry {
        let mut args = Vec::new();
        while let Some(t) = self.peek() {
            if t.line != line {
                break;
            }
            match &t.tok {
                Lex::Word(w) => args.push(FoamToken::Word(w.clone())),
                Lex::Str(s) => args.push(FoamToken::Str(s.clone())),
                _ => break,
            }
            self.pos += 1;
        }
        FoamEntry { keyword, quoted: false, value: FoamValue::Stream(args) }
    }

    /// Value tokens up to and including the terminating `;`.
    fn stream(&mut self) -> Vec<FoamToken> {
        let mut out = Vec::new();
        loop {
            let Some(tok) = self.peek().cloned() else {
                self.diag_here("missing ';' before end of file");
                return out;
            };
            match tok.tok {
                Lex::Punct(';') => {
                    self.pos += 1;
                    return out;
                }
                Lex::Punct('}') => {
                    self.diag_here("missing ';' before '}'");
                    return out;
                }
                Lex::Punct(open @ ('(' | '[')) => {
                    self.pos += 1;
                    out.push(self.list(open));
                }
                Lex::Punct('{') => {
                    self.pos += 1;
                    out.push(FoamToken::Dict(self.entries(true)));
                }
                Lex::Punct(p) => {
                    self.diag_here(&format!("unmatched '{p}'"));
                    self.pos += 1;
                }
                Lex::Word(w) => {
                    self.pos += 1;
                    out.push(FoamToken::Word(w));
                }
                Lex::Str(s) => {
                    self.pos += 1;
                    out.push(FoamToken::Str(s));
                }
                Lex::Code(s) => {
                    self.pos += 1;
                    out.push(FoamToken::Code(s));
                }
            }
        }
    }

    fn list(&mut self, open: char) -> FoamToken {
        let close = if open == '(' { ')' } else { ']' };
        let mut items = Vec::new();
        loop {
            let Some(tok) = self.peek().cloned() else {
                self.diag_here(&format!("missing '{close}' before end of file"));
                return FoamToken::List { open, items };
            };
            match tok.tok {
                Lex::Punct(c) if c == close => {
                    self.pos += 1;
                    return FoamToken::List { open, items };
                }
                Lex::Punct(o @ ('(' | '[')) => {
                    self.pos += 1;
                    items.push(self.list(o));
                }
                Lex::Punct('{') => {
                    self.pos += 1;
                    items.push(FoamToken::Dict(self.entries(true)));
                }
                Lex::Punct(';') | Lex::Punct('}') => {
                    // unbalanced list: leave the terminator for the caller
                    self.diag_here(&format!("missing '{close}'"));
                    return FoamToken::List { open, items };
                }
                Lex::Punct(p) => {
                    self.diag_here(&format!("mismatched '{p}', expected '{close}'"));
                    self.pos += 1;
                }
                Lex::Word(w) => {
                    self.pos += 1;
                    items.push(FoamToken::Word(w));
                }
                Lex::Str(s) => {
                    self.pos += 1;
                    items.push(FoamToken::Str(s));
                }
                Lex::Code(s) => {
                    self.pos += 1;
                    items.push(FoamToken::Code(s));
                }
            }
        }
    }
}
