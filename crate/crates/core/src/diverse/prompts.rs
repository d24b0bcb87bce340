//! Rephrase prompt assets and the task-to-prompt routing table.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversarial::FQA_INSTRUCTION;
use crate::benchmark::SCANQA_SUFFIX;
use crate::sample::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTask {
    Scanrefer,
    Multi3drefer,
    Nr3d,
    Sr3d,
    Scanqa,
    Sqa3d,
}

impl PromptTask {
    pub const ALL: [PromptTask; 6] = [
        PromptTask::Scanrefer,
        PromptTask::Multi3drefer,
        PromptTask::Nr3d,
        PromptTask::Sr3d,
        PromptTask::Scanqa,
        PromptTask::Sqa3d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptTask::Scanrefer => "scanrefer",
            PromptTask::Multi3drefer => "multi3drefer",
            PromptTask::Nr3d => "nr3d",
            PromptTask::Sr3d => "sr3d",
            PromptTask::Scanqa => "scanqa",
            PromptTask::Sqa3d => "sqa3d",
        }
    }
}

/// Which part of a sample is sent for rephrasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RephraseTarget {
    Question,
    Answer,
    /// Question minus a fixed instruction suffix, which is re-appended after.
    QuestionBeforeSuffix(&'static str),
}

/// Prompt and target for a task; `None` means the task is never rephrased.
/// Tasks derived from another source reuse that source's prompt.
pub fn route(task: Task) -> Option<(PromptTask, RephraseTarget)> {
    use RephraseTarget::*;
    Some(match task {
        Task::BenchmarkScanrefer => (PromptTask::Scanrefer, Question),
        Task::BenchmarkMulti3drefer => (PromptTask::Multi3drefer, Question),
        Task::BenchmarkScanqa => (PromptTask::Scanqa, QuestionBeforeSuffix(SCANQA_SUFFIX)),
        Task::DiverseNr3dGrounding => (PromptTask::Nr3d, Question),
        Task::DiverseNr3dCaption => (PromptTask::Nr3d, Answer),
        Task::DiverseSr3dGrounding | Task::Pf3dvg => (PromptTask::Sr3d, Question),
        Task::Fqa3d => (PromptTask::Scanqa, QuestionBeforeSuffix(FQA_INSTRUCTION)),
        _ => return None,
    })
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("missing prompt file {0}")]
    Missing(String),
    #[error("prompt file {0} is empty")]
    Empty(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub system: String,
    pub one_shot: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptLibrary {
    sets: BTreeMap<PromptTask, PromptSet>,
}

macro_rules! builtin {
    ($name:literal) => {
        (
            include_str!(concat!("../../assets/prompts/", $name, ".system.txt")),
            include_str!(concat!("../../assets/prompts/", $name, ".one_shot.txt")),
        )
    };
}

fn builtin_text(task: PromptTask) -> (&'static str, &'static str) {
    match task {
        PromptTask::Scanrefer => builtin!("scanrefer"),
        PromptTask::Multi3drefer => builtin!("multi3drefer"),
        PromptTask::Nr3d => builtin!("nr3d"),
        PromptTask::Sr3d => builtin!("sr3d"),
        PromptTask::Scanqa => builtin!("scanqa"),
        PromptTask::Sqa3d => builtin!("sqa3d"),
    }
}

/// Drop leading `#` header lines and surrounding whitespace.
pub fn strip_header(text: &str) -> String {
    let body: Vec<&str> = text
        .lines()
        .skip_while(|l| l.trim_start().starts_with('#'))
        .collect();
    body.join("\n").trim().to_string()
}

impl PromptLibrary {
    pub fn builtin() -> Self {
        let sets = PromptTask::ALL
            .into_iter()
            .map(|t| {
                let (system, one_shot) = builtin_text(t);
                (
                    t,
                    PromptSet {
                        system: strip_header(system),
                        one_shot: strip_header(one_shot),
                    },
                )
            })
            .collect();
        Self { sets }
    }

    /// Load `{task}.system.txt` and `{task}.one_shot.txt` for every prompt
    /// task from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut sets = BTreeMap::new();
        for t in PromptTask::ALL {
            let read = |role: &str| -> Result<String, PromptError> {
                let path = dir.join(format!("{}.{role}.txt", t.as_str()));
                let text = std::fs::read_to_string(&path)
                    .map_err(|_| PromptError::Missing(path.display().to_string()))?;
                let body = strip_header(&text);
                if body.is_empty() {
                    return Err(PromptError::Empty(path.display().to_string()));
                }
                Ok(body)
            };
            sets.insert(
                t,
                PromptSet {
                    system: read("system")?,
                    one_shot: read("one_shot")?,
                },
            );
        }
        Ok(Self { sets })
    }

    pub fn get(&self, task: PromptTask) -> &PromptSet {
        &self.sets[&task]
    }
}
