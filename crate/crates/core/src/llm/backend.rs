//! Chat backends: OpenAI-compatible HTTP and a scripted mock.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::prompt::{PromptBundle, UserPart};

pub const DEFAULT_API_KEY_ENV: &str = "SCENACT_API_KEY";
const ATTEMPTS: u32 = 3;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("backend unreachable after {attempts} attempts: {detail}")]
    Network { attempts: u32, detail: String },
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("mock script exhausted after {calls} responses")]
    ScriptExhausted { calls: usize },
    #[error("mock script has no response for prompt hash {hash}")]
    UnknownPromptHash { hash: String },
    #[error("mock script {path}: {detail}")]
    Script { path: String, detail: String },
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("malformed backend response: {0}")]
    Response(String),
    #[error("{0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Mock,
}

fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

fn default_retry_ms() -> u64 {
    250
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_path: Option<PathBuf>,
    #[serde(default)]
    pub temperature: f64,
    /// Environment variable holding a bearer token for the HTTP backend.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_retry_ms")]
    pub retry_base_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl BackendConfig {
    pub fn mock(script_path: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: None,
            model_name: String::new(),
            script_path: Some(script_path.into()),
            temperature: 0.0,
            api_key_env: default_key_env(),
            retry_base_ms: default_retry_ms(),
            timeout_secs: default_timeout(),
        }
    }

    pub fn http(endpoint: impl Into<String>, model_name: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::Http,
            endpoint: Some(endpoint.into()),
            model_name: model_name.into(),
            script_path: None,
            temperature: 0.0,
            api_key_env: default_key_env(),
            retry_base_ms: default_retry_ms(),
            timeout_secs: default_timeout(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        match self.kind {
            BackendKind::Http if self.endpoint.as_deref().is_none_or(str::is_empty) => {
                Err(LlmError::Config("http backend needs an endpoint".into()))
            }
            BackendKind::Mock if self.script_path.is_none() => {
                Err(LlmError::Config("mock backend needs a script_path".into()))
            }
            _ if !self.temperature.is_finite() || self.temperature < 0.0 => {
                Err(LlmError::Config(format!("temperature {} out of range", self.temperature)))
            }
            _ => Ok(()),
        }
    }

    pub fn connect(&self) -> Result<Box<dyn ChatBackend>, LlmError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Mock => Box::new(MockBackend::from_file(self.script_path.as_ref().expect("validated"))?),
            BackendKind::Http => Box::new(HttpBackend::new(self)?),
        })
    }
}

pub trait ChatBackend: Send + Sync {
    fn invoke(&self, prompt: &PromptBundle) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "responses", rename_all = "snake_case")]
pub enum MockScript {
    Sequence(Vec<String>),
    Keyed(BTreeMap<String, String>),
}

#[derive(Debug)]
pub struct MockBackend {
    script: MockScript,
    next: Mutex<usize>,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            next: Mutex::new(0),
        }
    }

    pub fn sequence(responses: Vec<String>) -> Self {
        Self::new(MockScript::Sequence(responses))
    }

    pub fn keyed(responses: BTreeMap<String, String>) -> Self {
        Self::new(MockScript::Keyed(responses))
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let err = |detail: String| LlmError::Script {
            path: path.display().to_string(),
            detail,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let script: MockScript = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        Ok(Self::new(script))
    }

    /// Number of replies served so far.
    pub fn calls(&self) -> usize {
        *self.next.lock().expect("mock counter poisoned")
    }
}

impl ChatBackend for MockBackend {
    fn invoke(&self, prompt: &PromptBundle) -> Result<String, LlmError> {
        let mut next = self.next.lock().expect("mock counter poisoned");
        let reply = match &self.script {
            MockScript::Sequence(r) => r.get(*next).cloned().ok_or(LlmError::ScriptExhausted { calls: *next })?,
            MockScript::Keyed(map) => {
                let hash = prompt.hash();
                map.get(&hash).cloned().ok_or(LlmError::UnknownPromptHash { hash })?
            }
        };
        *next += 1;
        Ok(reply)
    }
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    temperature: f64,
    api_key: Option<String>,
    retry_base: Duration,
}

fn content_parts(parts: &[UserPart]) -> Vec<Value> {
    parts
        .iter()
        .map(|p| match p {
            UserPart::Text { text } => json!({"type": "text", "text": text}),
            UserPart::Image { reference, .. }
                if reference.starts_with("http://") || reference.starts_with("https://") || reference.starts_with("data:") =>
            {
                json!({"type": "image_url", "image_url": {"url": reference}})
            }
            UserPart::Image { reference, marks } => json!({
                "type": "text",
                "text": format!("[{reference}: labeled objects {}]", marks.join(", ")),
            }),
        })
        .collect()
}

/// Request body in the chat-completions wire shape.
pub fn request_body(model: &str, temperature: f64, prompt: &PromptBundle) -> Value {
    let mut messages = vec![json!({"role": "system", "content": prompt.system_text})];
    for shot in &prompt.fewshot {
        messages.push(json!({"role": "user", "content": content_parts(&shot.user_parts)}));
        messages.push(json!({"role": "assistant", "content": shot.assistant_text}));
    }
    messages.push(json!({"role": "user", "content": content_parts(&prompt.user_parts)}));
    json!({"model": model, "messages": messages, "temperature": temperature})
}

impl HttpBackend {
    pub fn new(cfg: &BackendConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(HttpBackend {
            client,
            endpoint: cfg.endpoint.clone().unwrap_or_default(),
            model: cfg.model_name.clone(),
            temperature: cfg.temperature,
            api_key: std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty()),
            retry_base: Duration::from_millis(cfg.retry_base_ms),
        })
    }
}

impl ChatBackend for HttpBackend {
    fn invoke(&self, prompt: &PromptBundle) -> Result<String, LlmError> {
        let body = request_body(&self.model, self.temperature, prompt);
        let mut last = None;
        for attempt in 0..ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(self.retry_base * 2u32.pow(attempt - 1));
            }
            let mut req = self.client.post(&self.endpoint).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = match req.send() {
                Ok(r) => r,
                Err(e) => {
                    tracing::warn!(attempt, error = %e, "backend request failed");
                    last = Some(LlmError::Network {
                        attempts: attempt + 1,
                        detail: e.to_string(),
                    });
                    continue;
                }
            };
            let status = resp.status();
            let text = resp.text().unwrap_or_default();
            if status.is_success() {
                let v: Value = serde_json::from_str(&text).map_err(|e| LlmError::Response(e.to_string()))?;
                return v["choices"][0]["message"]["content"]
                    .as_str()
                    .map(str::to_string)
                    .ok_or_else(|| LlmError::Response(format!("no choices[0].message.content in {text}")));
            }
            let err = LlmError::Status {
                status: status.as_u16(),
                body: text,
            };
            if status.is_server_error() || status.as_u16() == 429 {
                tracing::warn!(attempt, status = status.as_u16(), "backend returned transient status");
                last = Some(err);
                continue;
            }
            return Err(err);
        }
        Err(last.expect("at least one attempt ran"))
    }
}
