//! Chat-completions client for hosted models.

use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{estimate_tokens, Backend, BackendConfig, BackendKind, Completion, CompletionRequest, LlmError};

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Usage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
    completion_tokens_details: Option<CompletionDetails>,
}

#[derive(Debug, Deserialize)]
struct CompletionDetails {
    reasoning_tokens: Option<u64>,
}

pub struct LiveBackend {
    cfg: BackendConfig,
    api_key: String,
    agent: ureq::Agent,
}

enum Attempt {
    Done(Completion),
    Retry(LlmError),
    Fatal(LlmError),
}

impl LiveBackend {
    /// Fails with `AuthError` when the key variable is unset or empty.
    pub fn new(cfg: BackendConfig) -> Result<Self, LlmError> {
        let api_key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| LlmError::AuthError(format!("environment variable {} is not set", cfg.api_key_env)))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_s.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { cfg, api_key, agent })
    }

    pub fn request_body(&self, req: &CompletionRequest<'_>) -> Value {
        let content = match req.image {
            None => Value::String(req.prompt.to_string()),
            Some(img) => json!([
                {"type": "text", "text": req.prompt},
                {"type": "image_url", "image_url": {"url": img.data_uri()}},
            ]),
        };
        json!({
            "model": self.cfg.model_id,
            "temperature": self.cfg.temperature,
            "messages": [{"role": "user", "content": content}],
        })
    }

    fn attempt(&self, body: &Value, prompt: &str) -> Attempt {
        let resp = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let mut resp = match resp {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(LlmError::Timeout(0)),
            Err(e) => return Attempt::Retry(LlmError::BackendUnavailable(e.to_string())),
        };
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => return Attempt::Fatal(LlmError::AuthError(format!("HTTP {status}"))),
            408 | 429 | 500..=599 => return Attempt::Retry(LlmError::BackendUnavailable(format!("HTTP {status}"))),
            _ => {
                let detail = resp.body_mut().read_to_string().unwrap_or_default();
                return Attempt::Fatal(LlmError::BackendUnavailable(format!("HTTP {status}: {detail}")));
            }
        }
        let parsed: ChatResponse = match resp.body_mut().read_json() {
            Ok(p) => p,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(LlmError::Timeout(0)),
            Err(e) => return Attempt::Fatal(LlmError::BackendUnavailable(format!("bad response body: {e}"))),
        };
        Attempt::Done(completion_from(parsed, prompt))
    }
}

fn completion_from(resp: ChatResponse, prompt: &str) -> Completion {
    let text = resp
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .unwrap_or_default();
    let usage = resp.usage;
    let t_in = usage.as_ref().and_then(|u| u.prompt_tokens);
    let completion = usage.as_ref().and_then(|u| u.completion_tokens);
    let reasoning = usage
        .as_ref()
        .and_then(|u| u.completion_tokens_details.as_ref())
        .and_then(|d| d.reasoning_tokens)
        .unwrap_or(0);
    let estimated = t_in.is_none() || completion.is_none();
    let t_out = match completion {
        Some(c) => c.saturating_sub(reasoning),
        None => estimate_tokens(&text),
    };
    Completion {
        t_in: t_in.unwrap_or_else(|| estimate_tokens(prompt)),
        t_think: reasoning,
        t_out,
        text,
        estimated,
    }
}

impl Backend for LiveBackend {
    fn kind(&self) -> BackendKind {
        self.cfg.kind
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, LlmError> {
        let body = self.request_body(req);
        let attempts = self.cfg.retries + 1;
        let mut last = LlmError::BackendUnavailable("no attempt made".into());
        for i in 0..attempts {
            if i > 0 {
                let delay = self.cfg.backoff_ms.saturating_mul(1u64 << (i - 1).min(16));
                log::warn!("{} retry {i}/{} in {delay} ms: {last}", req.purpose, self.cfg.retries);
                thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(&body, req.prompt) {
                Attempt::Done(c) => return Ok(c),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => last = e,
            }
        }
        Err(match last {
            LlmError::Timeout(_) => LlmError::Timeout(attempts),
            other => other,
        })
    }
}
