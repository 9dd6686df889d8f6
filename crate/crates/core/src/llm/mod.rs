//! Completion backends behind one gateway, with prompt templates and token
//! accounting.

mod ledger;
mod live;
mod mock;
mod template;

pub use ledger::{AgentRole, LedgerEntry, TokenLedger, TokenTotals};
pub use live::LiveBackend;
pub use mock::{MockBackend, MockResponse, Scenario, ScriptedPostRun, SCENARIO_SCHEMA_VERSION};
pub use template::{placeholders_in, render_prompt, render_str, TemplateId};

use std::fmt;
use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("missing binding for placeholder '{0}'")]
    MissingBinding(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("request timed out after {0} attempt(s)")]
    Timeout(u32),
    #[error("unsupported media: {0}")]
    UnsupportedMedia(String),
    #[error("gateway contract violation: {0}")]
    ContractViolation(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    #[error("mock scenario error: {0}")]
    Scenario(String),
    #[error("no mock response for purpose '{purpose}' turn {turn}")]
    NoMockResponse { purpose: String, turn: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    LiveText,
    LiveMultimodal,
    Mock,
}

impl BackendKind {
    pub fn accepts_images(self) -> bool {
        matches!(self, BackendKind::LiveMultimodal | BackendKind::Mock)
    }
}

/// Prices per token.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prices {
    #[serde(rename = "in", default)]
    pub p_in: f64,
    #[serde(rename = "think", default)]
    pub p_think: f64,
    #[serde(rename = "out", default)]
    pub p_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model_id: String,
    pub temperature: f64,
    pub prices: Prices,
    pub api_key_env: String,
    pub timeout_s: u64,
    pub retries: u32,
    /// First retry delay; doubles on every further attempt.
    pub backoff_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model_id: "gpt-4o".into(),
            temperature: 0.01,
            prices: Prices::default(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_s: 120,
            retries: 3,
            backoff_ms: 1000,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidConfig(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        let p = self.prices;
        if [p.p_in, p.p_think, p.p_out].iter().any(|x| x.is_nan() || *x < 0.0) {
            return Err(LlmError::InvalidConfig("prices must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaType {
    Png,
    Jpeg,
}

impl MediaType {
    pub fn mime(self) -> &'static str {
        match self {
            MediaType::Png => "image/png",
            MediaType::Jpeg => "image/jpeg",
        }
    }

    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "png" => Some(MediaType::Png),
            "jpg" | "jpeg" => Some(MediaType::Jpeg),
            _ => None,
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    bytes: Vec<u8>,
    media: MediaType,
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Image")
            .field("media", &self.media)
            .field("len", &self.bytes.len())
            .finish()
    }
}

impl Image {
    pub fn new(bytes: Vec<u8>, media: MediaType) -> Result<Self, LlmError> {
        if bytes.is_empty() {
            return Err(LlmError::UnsupportedMedia("zero-byte image".into()));
        }
        Ok(Self { bytes, media })
    }

    pub fn from_path(path: &Path) -> Result<Self, LlmError> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let media = MediaType::from_extension(ext)
            .ok_or_else(|| LlmError::UnsupportedMedia(format!("{} (expected png or jpeg)", path.display())))?;
        let bytes = std::fs::read(path)
            .map_err(|e| LlmError::UnsupportedMedia(format!("cannot read {}: {e}", path.display())))?;
        Self::new(bytes, media)
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn media(&self) -> MediaType {
        self.media
    }

    pub fn base64(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(&self.bytes)
    }

    pub fn data_uri(&self) -> String {
        format!("data:{};base64,{}", self.media.mime(), self.base64())
    }

    pub fn digest(&self) -> String {
        sha256_hex(&self.bytes)
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// Whitespace token count, used when a backend reports no usage.
pub fn estimate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub t_in: u64,
    pub t_think: u64,
    pub t_out: u64,
    #[serde(default)]
    pub estimated: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub purpose: &'a str,
    pub prompt: &'a str,
    pub image: Option<&'a Image>,
}

pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, LlmError>;
}

/// Routes calls to one backend and records every completion in the ledger.
pub struct Gateway {
    backend: Box<dyn Backend>,
    ledger: Mutex<TokenLedger>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").field("kind", &self.backend.kind()).finish()
    }
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Self {
            backend,
            ledger: Mutex::new(TokenLedger::default()),
        }
    }

    /// Mock configs need a scenario; live configs check the API key here.
    pub fn from_config(cfg: &BackendConfig, scenario: Option<&Path>) -> Result<Self, LlmError> {
        cfg.validate()?;
        let backend: Box<dyn Backend> = match cfg.kind {
            BackendKind::Mock => {
                let path = scenario.ok_or_else(|| LlmError::InvalidConfig("mock backend needs a scenario".into()))?;
                Box::new(MockBackend::new(Scenario::load(path)?))
            }
            BackendKind::LiveText | BackendKind::LiveMultimodal => Box::new(LiveBackend::new(cfg.clone())?),
        };
        Ok(Self::new(backend))
    }

    pub fn kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn complete_text(&self, role: AgentRole, purpose: &str, prompt: &str) -> Result<Completion, LlmError> {
        self.call(role, CompletionRequest { purpose, prompt, image: None })
    }

    pub fn complete_multimodal(
        &self,
        role: AgentRole,
        purpose: &str,
        prompt: &str,
        image: &Image,
    ) -> Result<Completion, LlmError> {
        if !self.kind().accepts_images() {
            return Err(LlmError::ContractViolation(format!(
                "{:?} backend cannot take images",
                self.kind()
            )));
        }
        if image.bytes.is_empty() {
            return Err(LlmError::UnsupportedMedia("zero-byte image".into()));
        }
        self.call(role, CompletionRequest { purpose, prompt, image: Some(image) })
    }

    fn call(&self, role: AgentRole, req: CompletionRequest<'_>) -> Result<Completion, LlmError> {
        let c = self.backend.complete(&req)?;
        log::debug!("{role} {} -> {} chars", req.purpose, c.text.len());
        self.lock().record(LedgerEntry {
            role,
            purpose: req.purpose.to_string(),
            t_in: c.t_in,
            t_think: c.t_think,
            t_out: c.t_out,
            estimated: c.estimated,
            multimodal: req.image.is_some(),
        });
        Ok(c)
    }

    pub fn record_retrieval(&self, role: AgentRole, purpose: &str) {
        self.lock().record_retrieval(role, purpose);
    }

    pub fn ledger(&self) -> TokenLedger {
        self.lock().clone()
    }

    fn lock(&self) -> MutexGuard<'_, TokenLedger> {
        self.ledger.lock().unwrap_or_else(|p| p.into_inner())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo(BackendKind);

    impl Backend for Echo {
        fn kind(&self) -> BackendKind {
            self.0
        }
        fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, LlmError> {
            Ok(Completion {
                text: req.prompt.to_string(),
                t_in: estimate_tokens(req.prompt),
                t_think: 0,
                t_out: 1,
                estimated: true,
            })
        }
    }

    #[test]
    fn empty_prompt_passes_through() {
        let g = Gateway::new(Box::new(Echo(BackendKind::LiveText)));
        let c = g.complete_text(AgentRole::Observer, "DivideTask", "").unwrap();
        assert_eq!(c.text, "");
        assert_eq!(g.ledger().entries.len(), 1);
    }

    #[test]
    fn text_backend_rejects_images_locally() {
        let g = Gateway::new(Box::new(Echo(BackendKind::LiveText)));
        let img = Image::new(vec![1, 2, 3], MediaType::Png).unwrap();
        assert!(matches!(
            g.complete_multimodal(AgentRole::Observer, "ObservePicture", "p", &img),
            Err(LlmError::ContractViolation(_))
        ));
        assert!(g.ledger().entries.is_empty());
    }

    #[test]
    fn zero_byte_image() {
        assert!(matches!(Image::new(Vec::new(), MediaType::Png), Err(LlmError::UnsupportedMedia(_))));
    }

    #[test]
    fn config_bounds() {
        let mut cfg = BackendConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.temperature, 0.01);
        cfg.temperature = 2.5;
        assert!(cfg.validate().is_err());
        cfg.temperature = 0.0;
        cfg.prices.p_out = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_keys() {
        let cfg: BackendConfig = toml::from_str(
            "kind = \"live_text\"\nmodel_id = \"m\"\ntimeout_s = 5\nretries = 1\n[prices]\nin = 1.5\nthink = 2.0\nout = 3.0\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, BackendKind::LiveText);
        assert_eq!(cfg.prices, Prices { p_in: 1.5, p_think: 2.0, p_out: 3.0 });
        assert_eq!(cfg.temperature, 0.01);
    }

    #[test]
    fn data_uri_shape() {
        let img = Image::new(b"abc".to_vec(), MediaType::Jpeg).unwrap();
        assert_eq!(img.data_uri(), "data:image/jpeg;base64,YWJj");
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
