//! One-shot rephrasing against a chat-completion backend.

use std::collections::VecDeque;
use std::sync::{Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream;
use crate::sample::object_tokens_in;

pub const TEMPERATURES: [f64; 3] = [1.1, 1.2, 1.3];
pub const PAYLOAD_PREFIX: &str = "sentence=";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        Self {
            role: role.to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Response(String),
}

/// A chat-completion service.
pub trait ChatBackend: Send + Sync {
    fn name(&self) -> String;
    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError>;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RephraseError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend failed after {attempts} attempt(s): {source}")]
    Transport { attempts: u32, source: BackendError },
    #[error("no usable rephrase after {attempts} attempt(s)")]
    NoMarker { attempts: u32 },
    #[error("not sent: backend unreachable after repeated transport failures")]
    Aborted,
}

impl RephraseError {
    /// Transport failures and aborted requests are backend problems rather
    /// than problems with the sample.
    pub fn is_transport(&self) -> bool {
        matches!(self, RephraseError::Transport { .. } | RephraseError::Aborted)
    }

    pub fn attempts(&self) -> u32 {
        match self {
            RephraseError::InvalidRequest(_) | RephraseError::Aborted => 0,
            RephraseError::Transport { attempts, .. } | RephraseError::NoMarker { attempts } => *attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RephraseRequest {
    pub system_prompt: String,
    pub one_shot: String,
    pub payload: String,
    pub temperature: f64,
    pub task: String,
}

impl RephraseRequest {
    pub fn new(
        system_prompt: impl Into<String>,
        one_shot: impl Into<String>,
        original: &str,
        temperature: f64,
        task: impl Into<String>,
    ) -> Result<Self, RephraseError> {
        if !TEMPERATURES.contains(&temperature) {
            return Err(RephraseError::InvalidRequest(format!(
                "temperature {temperature} not in {TEMPERATURES:?}"
            )));
        }
        if original.contains('\n') {
            return Err(RephraseError::InvalidRequest("sentence spans several lines".into()));
        }
        Ok(Self {
            system_prompt: system_prompt.into(),
            one_shot: one_shot.into(),
            payload: format!("{PAYLOAD_PREFIX}{original}"),
            temperature,
            task: task.into(),
        })
    }

    pub fn original(&self) -> &str {
        self.payload.strip_prefix(PAYLOAD_PREFIX).unwrap_or(&self.payload)
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![
            ChatMessage::new("system", self.system_prompt.clone()),
            ChatMessage::new("user", self.one_shot.clone()),
            ChatMessage::new("user", self.payload.clone()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RephraseResult {
    pub original: String,
    pub rephrased: String,
    pub raw_response: String,
    pub temperature: f64,
    pub backend: String,
    pub attempts: u32,
}

/// How strictly the object tokens must survive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdCheck {
    /// Same tokens with the same multiplicities, any order.
    Multiset,
    /// Same tokens in the same order.
    Sequence,
}

impl IdCheck {
    pub fn holds(self, original: &str, rephrased: &str) -> bool {
        let mut a = object_tokens_in(original);
        let mut b = object_tokens_in(rephrased);
        if self == IdCheck::Multiset {
            a.sort();
            b.sort();
        }
        a == b
    }
}

fn marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*rephrase\s*=\s*(.*)$").expect("valid pattern"))
}

/// Text after the first `rephrase=` line, trimmed. Empty text counts as absent.
pub fn extract_rephrase(raw: &str) -> Option<String> {
    let line = raw.lines().find_map(|l| marker().captures(l))?;
    let text = line[1].trim();
    (!text.is_empty()).then(|| text.to_string())
}

/// Uniform draw from [`TEMPERATURES`] keyed by `key`.
pub fn draw_temperature(seed: u64, key: &str) -> f64 {
    let mut rng = stream(seed, "rephrase", key, 0);
    *TEMPERATURES.choose(&mut rng).expect("non-empty")
}

/// Send the request, retrying while the marker is missing or the tokens do
/// not survive, up to `attempt_budget` calls.
pub fn rephrase(
    req: &RephraseRequest,
    backend: &dyn ChatBackend,
    attempt_budget: u32,
    check: IdCheck,
) -> Result<RephraseResult, RephraseError> {
    if attempt_budget == 0 {
        return Err(RephraseError::InvalidRequest("attempt budget is zero".into()));
    }
    let messages = req.messages();
    for attempt in 1..=attempt_budget {
        let raw = backend
            .complete(&messages, req.temperature)
            .map_err(|source| RephraseError::Transport { attempts: attempt, source })?;
        if let Some(text) = extract_rephrase(&raw) {
            if check.holds(req.original(), &text) {
                return Ok(RephraseResult {
                    original: req.original().to_string(),
                    rephrased: text,
                    raw_response: raw,
                    temperature: req.temperature,
                    backend: backend.name(),
                    attempts: attempt,
                });
            }
        }
    }
    Err(RephraseError::NoMarker {
        attempts: attempt_budget,
    })
}

// ---------------------------------------------------------------------------
// Offline backends

/// Deterministic offline backend: a seeded, token-preserving paraphrase of
/// the payload sentence.
#[derive(Debug, Clone)]
pub struct MockBackend {
    pub seed: u64,
}

const OPENERS: [&str; 4] = ["", "Please: ", "In this scene, ", "Here is the request: "];
const SWAPS: [(&str, &str); 8] = [
    ("find", "locate"),
    ("object", "item"),
    ("close", "near"),
    ("provide", "give"),
    ("describe", "portray"),
    ("closest", "nearest"),
    ("big", "large"),
    ("small", "little"),
];

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn paraphrase(&self, sentence: &str, temperature: f64) -> String {
        let mut rng = stream(self.seed, "mock", sentence, temperature.to_bits());
        let words: Vec<String> = sentence
            .split(' ')
            .map(|w| {
                let lower = w.to_ascii_lowercase();
                match SWAPS.iter().find(|(a, _)| *a == lower) {
                    Some((_, b)) if rng.gen_bool(0.5) => b.to_string(),
                    _ => w.to_string(),
                }
            })
            .collect();
        let opener = OPENERS.choose(&mut rng).expect("non-empty");
        let body = words.join(" ");
        let out = format!("{opener}{body}");
        if out.trim().is_empty() {
            sentence.to_string()
        } else {
            out
        }
    }
}

impl ChatBackend for MockBackend {
    fn name(&self) -> String {
        format!("mock:{}", self.seed)
    }

    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError> {
        let payload = messages
            .iter()
            .rev()
            .find_map(|m| m.content.strip_prefix(PAYLOAD_PREFIX))
            .ok_or_else(|| BackendError::Response("no sentence= payload".into()))?;
        Ok(format!(
            "sentence={payload}\nrephrase={}",
            self.paraphrase(payload, temperature)
        ))
    }
}

/// Replays a fixed list of responses (or errors), one per call.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    script: Mutex<VecDeque<Result<String, BackendError>>>,
}

impl ScriptedBackend {
    pub fn new(script: impl IntoIterator<Item = Result<String, BackendError>>) -> Self {
        Self {
            script: Mutex::new(script.into_iter().collect()),
        }
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().expect("not poisoned").len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn complete(&self, _: &[ChatMessage], _: f64) -> Result<String, BackendError> {
        self.script
            .lock()
            .expect("not poisoned")
            .pop_front()
            .unwrap_or_else(|| Err(BackendError::Transport("script exhausted".into())))
    }
}
