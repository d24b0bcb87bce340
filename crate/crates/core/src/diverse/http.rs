//! Blocking HTTP chat-completion client.

use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::rephrase::{BackendError, ChatBackend, ChatMessage};

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    /// Header carrying the credential, e.g. `Authorization` or `api-key`.
    pub auth_header: String,
    pub api_key: Option<String>,
    /// Prefix the key with `Bearer ` when set.
    pub bearer: bool,
    /// Dot-separated path to the assistant text; numeric parts index arrays.
    pub response_path: String,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            auth_header: "Authorization".into(),
            api_key: None,
            bearer: true,
            response_path: "choices.0.message.content".into(),
            max_retries: 4,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
            timeout: Duration::from_secs(60),
        }
    }
}

impl HttpConfig {
    /// Defaults overridden by `RIGEN_ENDPOINT`, `RIGEN_MODEL`, `RIGEN_API_KEY`
    /// and `RIGEN_AUTH_HEADER`.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Ok(v) = std::env::var("RIGEN_ENDPOINT") {
            cfg.endpoint = v;
        }
        if let Ok(v) = std::env::var("RIGEN_MODEL") {
            cfg.model = v;
        }
        if let Ok(v) = std::env::var("RIGEN_AUTH_HEADER") {
            cfg.auth_header = v;
        }
        cfg.api_key = std::env::var("RIGEN_API_KEY").ok().filter(|k| !k.is_empty());
        cfg
    }
}

pub struct HttpBackend {
    cfg: HttpConfig,
    agent: ureq::Agent,
}

/// Follow a dot path such as `choices.0.message.content`.
pub fn lookup<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.')
        .filter(|p| !p.is_empty())
        .try_fold(value, |v, part| match part.parse::<usize>() {
            Ok(i) if v.is_array() => v.get(i),
            _ => v.get(part),
        })
}

fn retryable(e: &BackendError) -> bool {
    match e {
        BackendError::Transport(_) => true,
        BackendError::Status { status, .. } => *status == 429 || *status >= 500,
        BackendError::Response(_) => false,
    }
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(cfg.timeout))
            .build()
            .into();
        Self { cfg, agent }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.cfg
    }

    fn once(&self, body: &Value) -> Result<String, BackendError> {
        let mut req = self.agent.post(&self.cfg.endpoint);
        if let Some(key) = &self.cfg.api_key {
            let value = if self.cfg.bearer {
                format!("Bearer {key}")
            } else {
                key.clone()
            };
            req = req.header(self.cfg.auth_header.as_str(), value);
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Status { status, body: text });
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| BackendError::Response(e.to_string()))?;
        lookup(&value, &self.cfg.response_path)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Response(format!("no string at '{}'", self.cfg.response_path)))
    }
}

impl ChatBackend for HttpBackend {
    fn name(&self) -> String {
        format!("http:{}", self.cfg.model)
    }

    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": temperature,
            "messages": messages,
        });
        let mut delay = self.cfg.initial_backoff;
        let mut attempt = 0;
        loop {
            match self.once(&body) {
                Ok(text) => return Ok(text),
                Err(e) if retryable(&e) && attempt < self.cfg.max_retries => {
                    attempt += 1;
                    thread::sleep(delay);
                    delay = (delay * 2).min(self.cfg.max_backoff);
                }
                Err(e) => return Err(e),
            }
        }
    }
}
