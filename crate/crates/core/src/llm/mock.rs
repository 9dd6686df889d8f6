//! Scripted backend driven by a TOML scenario file.
//!
//! ```toml
//! schema_version = 1
//!
//! [[response]]
//! purpose = "DivideTask"
//! turn = 1                 # optional, 1-based per purpose
//! digest = "…"             # optional sha256 of the image, else of the prompt
//! text = "…"               # or text_file = "relative/path"
//! t_in = 120               # token counts are optional
//!
//! [[post_run]]
//! exit_status = 0
//! output = "…"
//! images = ["result.png"]
//! ```
//!
//! Lookup order: (purpose, turn, digest), (purpose, turn), (purpose, digest),
//! then (purpose) alone.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Deserialize;

use super::{estimate_tokens, sha256_hex, Backend, BackendKind, Completion, CompletionRequest, LlmError};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockResponse {
    pub purpose: String,
    pub turn: Option<u32>,
    pub digest: Option<String>,
    pub text: Option<String>,
    pub text_file: Option<String>,
    pub t_in: Option<u64>,
    pub t_think: Option<u64>,
    pub t_out: Option<u64>,
}

/// One scripted execution of a post-processing script.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedPostRun {
    pub exit_status: i32,
    #[serde(default)]
    pub output: String,
    #[serde(default)]
    pub images: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema_version: u32,
    #[serde(default)]
    description: String,
    #[serde(default, rename = "response")]
    responses: Vec<MockResponse>,
    #[serde(default, rename = "post_run")]
    post_runs: Vec<ScriptedPostRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub responses: Vec<MockResponse>,
    pub post_runs: Vec<ScriptedPostRun>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path)
            .map_err(|e| LlmError::Scenario(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&name, &text, &base)
    }

    /// `base` resolves `text_file` entries.
    pub fn parse(name: &str, text: &str, base: &Path) -> Result<Self, LlmError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| LlmError::Scenario(format!("{name}: {e}")))?;
        if file.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(LlmError::Scenario(format!(
                "{name}: unsupported schema_version {}",
                file.schema_version
            )));
        }
        let mut responses = file.responses;
        for r in &mut responses {
            match (&r.text, &r.text_file) {
                (Some(_), None) => {}
                (None, Some(rel)) => {
                    let p: PathBuf = base.join(rel);
                    let body = fs::read_to_string(&p)
                        .map_err(|e| LlmError::Scenario(format!("{name}: cannot read {}: {e}", p.display())))?;
                    r.text = Some(body);
                }
                _ => {
                    return Err(LlmError::Scenario(format!(
                        "{name}: response for '{}' needs exactly one of text, text_file",
                        r.purpose
                    )))
                }
            }
            if r.turn == Some(0) {
                return Err(LlmError::Scenario(format!("{name}: turns start at 1")));
            }
        }
        Ok(Self {
            name: name.to_string(),
            description: file.description,
            responses,
            post_runs: file.post_runs,
        })
    }

    pub fn lookup(&self, purpose: &str, turn: u32, digest: &str) -> Option<&MockResponse> {
        let candidates = || self.responses.iter().filter(|r| r.purpose == purpose);
        let d = |r: &&MockResponse| r.digest.as_deref() == Some(digest);
        candidates()
            .find(|r| r.turn == Some(turn) && d(r))
            .or_else(|| candidates().find(|r| r.turn == Some(turn) && r.digest.is_none()))
            .or_else(|| candidates().find(|r| r.turn.is_none() && d(r)))
            .or_else(|| candidates().find(|r| r.turn.is_none() && r.digest.is_none()))
    }
}

#[derive(Debug)]
pub struct MockBackend {
    scenario: Scenario,
    turns: Mutex<HashMap<String, u32>>,
}

impl MockBackend {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            turns: Mutex::new(HashMap::new()),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }
}

impl Backend for MockBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, LlmError> {
        let turn = {
            let mut turns = self.turns.lock().unwrap_or_else(|p| p.into_inner());
            let t = turns.entry(req.purpose.to_string()).or_insert(0);
            *t += 1;
            *t
        };
        let digest = match req.image {
            Some(img) => img.digest(),
            None => sha256_hex(req.prompt.as_bytes()),
        };
        let r = self
            .scenario
            .lookup(req.purpose, turn, &digest)
            .ok_or_else(|| LlmError::NoMockResponse {
                purpose: req.purpose.to_string(),
                turn,
            })?;
        let text = r.text.clone().unwrap_or_default();
        let estimated = r.t_in.is_none() || r.t_out.is_none();
        Ok(Completion {
            t_in: r.t_in.unwrap_or_else(|| estimate_tokens(req.prompt)),
            t_think: r.t_think.unwrap_or(0),
            t_out: r.t_out.unwrap_or_else(|| estimate_tokens(&text)),
            text,
            estimated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{Image, MediaType};

    const FIXTURE: &str = r#"
schema_version = 1

[[response]]
purpose = "DivideTask"
turn = 1
text = "first"
t_in = 10
t_think = 2
t_out = 3

[[response]]
purpose = "DivideTask"
text = "later"

[[response]]
purpose = "ObservePicture"
digest = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
text = "Geometric description: box"
t_in = 5
t_out = 4
"#;

    fn backend() -> MockBackend {
        MockBackend::new(Scenario::parse("t", FIXTURE, Path::new(".")).unwrap())
    }

    fn ask(b: &MockBackend, purpose: &str, prompt: &str) -> Result<Completion, LlmError> {
        b.complete(&CompletionRequest { purpose, prompt, image: None })
    }

    #[test]
    fn turn_keyed_then_fallback() {
        let b = backend();
        let c = ask(&b, "DivideTask", "x y").unwrap();
        assert_eq!((c.text.as_str(), c.t_in, c.t_think, c.t_out, c.estimated), ("first", 10, 2, 3, false));
        let c = ask(&b, "DivideTask", "x y").unwrap();
        assert_eq!(c.text, "later");
        assert!(c.estimated);
        assert_eq!(c.t_in, 2);
    }

    #[test]
    fn image_digest_key() {
        let b = backend();
        let img = Image::new(b"abc".to_vec(), MediaType::Png).unwrap();
        let c = b
            .complete(&CompletionRequest { purpose: "ObservePicture", prompt: "p", image: Some(&img) })
            .unwrap();
        assert!(c.text.starts_with("Geometric description:"));
        let other = Image::new(b"abd".to_vec(), MediaType::Png).unwrap();
        assert!(matches!(
            b.complete(&CompletionRequest { purpose: "ObservePicture", prompt: "p", image: Some(&other) }),
            Err(LlmError::NoMockResponse { .. })
        ));
    }

    #[test]
    fn identical_keys_identical_output() {
        let a = backend();
        let b = backend();
        for _ in 0..3 {
            assert_eq!(ask(&a, "DivideTask", "q").unwrap(), ask(&b, "DivideTask", "q").unwrap());
        }
    }

    #[test]
    fn rejects_bad_files() {
        assert!(Scenario::parse("v", "schema_version = 2", Path::new(".")).is_err());
        assert!(Scenario::parse("v", "schema_version = 1\nextra = 3", Path::new(".")).is_err());
        let both = "schema_version = 1\n[[response]]\npurpose = \"a\"\ntext = \"x\"\ntext_file = \"y\"\n";
        assert!(Scenario::parse("v", both, Path::new(".")).is_err());
    }

    #[test]
    fn text_file_resolved() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("body.txt"), "from file").unwrap();
        let s = Scenario::parse(
            "f",
            "schema_version = 1\n[[response]]\npurpose = \"a\"\ntext_file = \"body.txt\"\n",
            dir.path(),
        )
        .unwrap();
        assert_eq!(s.responses[0].text.as_deref(), Some("from file"));
    }
}
