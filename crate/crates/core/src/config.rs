//! Run configuration file (TOML).
//!
//! ```toml
//! preset = "paper-mix"      # optional; group quotas scaled by `scale`
//! scale = 0.001
//!
//! [corpus]                  # paths relative to this file
//! scenes = "corpus/scenes"
//! sr3d = "corpus/sr3d.jsonl"
//! qa = "corpus/qa.jsonl"
//! captions = "corpus/captions.jsonl"
//!
//! [generation]              # any GenConfig field
//! seed = 7
//! hope_negative_fraction = 0.5
//!
//! [generation.quotas]       # per-task overrides
//! hroc = 100
//!
//! [rephrase]
//! enabled = true
//! backend = "mock"          # or "http"
//! attempt_budget = 3
//! ```
//!
//! Precedence: built-in defaults, then this file, then `RIGEN_*` environment
//! variables, then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversarial::GenConfig;
use crate::dataset::compose::{plan, preset_quotas, ComposeError, Preset};
use crate::diverse::http::HttpConfig;
use crate::diverse::pipeline::{BenchmarkMode, RephraseConfig};
use crate::sample::Task;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid value for {name}: {value}")]
    Env { name: &'static str, value: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub scenes: Option<PathBuf>,
    pub sr3d: Option<PathBuf>,
    pub qa: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RephraseSection {
    pub enabled: bool,
    pub backend: BackendKind,
    pub attempt_budget: u32,
    pub max_in_flight: usize,
    pub benchmark_mode: BenchmarkMode,
    pub prompts_dir: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub auth_header: Option<String>,
    pub response_path: Option<String>,
    pub max_retries: Option<u32>,
    pub initial_backoff_ms: Option<u64>,
    pub timeout_secs: Option<u64>,
}

impl Default for RephraseSection {
    fn default() -> Self {
        let d = RephraseConfig::default();
        Self {
            enabled: false,
            backend: BackendKind::Mock,
            attempt_budget: d.attempt_budget,
            max_in_flight: d.max_in_flight,
            benchmark_mode: d.benchmark_mode,
            prompts_dir: None,
            endpoint: None,
            model: None,
            auth_header: None,
            response_path: None,
            max_retries: None,
            initial_backoff_ms: None,
            timeout_secs: None,
        }
    }
}

impl RephraseSection {
    pub fn pipeline_config(&self, seed: u64) -> RephraseConfig {
        RephraseConfig {
            seed,
            attempt_budget: self.attempt_budget,
            max_in_flight: self.max_in_flight,
            benchmark_mode: self.benchmark_mode,
            ..RephraseConfig::default()
        }
    }

    /// HTTP settings: environment first, then the file's explicit values.
    pub fn http_config(&self) -> HttpConfig {
        let mut cfg = HttpConfig::from_env();
        if let Some(v) = &self.endpoint {
            cfg.endpoint = v.clone();
        }
        if let Some(v) = &self.model {
            cfg.model = v.clone();
        }
        if let Some(v) = &self.auth_header {
            cfg.auth_header = v.clone();
        }
        if let Some(v) = &self.response_path {
            cfg.response_path = v.clone();
        }
        if let Some(v) = self.max_retries {
            cfg.max_retries = v;
        }
        if let Some(v) = self.initial_backoff_ms {
            cfg.initial_backoff = std::time::Duration::from_millis(v);
        }
        if let Some(v) = self.timeout_secs {
            cfg.timeout = std::time::Duration::from_secs(v);
        }
        cfg
    }

    /// Apply `RIGEN_MAX_IN_FLIGHT` and `RIGEN_RETRY_BUDGET`.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(v) = std::env::var("RIGEN_MAX_IN_FLIGHT") {
            self.max_in_flight = v.parse().map_err(|_| ConfigError::Env {
                name: "RIGEN_MAX_IN_FLIGHT",
                value: v.clone(),
            })?;
        }
        if let Ok(v) = std::env::var("RIGEN_RETRY_BUDGET") {
            self.attempt_budget = v.parse().map_err(|_| ConfigError::Env {
                name: "RIGEN_RETRY_BUDGET",
                value: v.clone(),
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub scale: Option<f64>,
    pub corpus: CorpusSection,
    pub generation: GenConfig,
    pub rephrase: RephraseSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Read a config file; relative corpus and prompt paths are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        let c = &mut cfg.corpus;
        for p in [&mut c.scenes, &mut c.sr3d, &mut c.qa, &mut c.captions, &mut c.lexicon] {
            fix(p);
        }
        fix(&mut cfg.rephrase.prompts_dir);
        Ok(cfg)
    }

    /// Per-task quotas: the preset split (if any) with explicit quotas on top.
    pub fn effective_quotas(&self) -> Result<BTreeMap<Task, usize>, ComposeError> {
        match self.preset {
            Some(p) => {
                let groups = preset_quotas(p, self.scale.unwrap_or(1.0))?;
                Ok(plan(groups, &self.generation.quotas))
            }
            None => Ok(self.generation.quotas.clone()),
        }
    }
}
