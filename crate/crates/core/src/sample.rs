//! Instruction samples, task tags and the object-token text convention.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::scene::{ObjectId, SceneGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Hope,
    Hroc,
    Pf3dvg,
    Fqa3d,
    DiverseCategoryQa,
    DiverseNr3dCaption,
    DiverseAppearance,
    DiverseRegion,
    DiverseNr3dGrounding,
    DiverseSr3dGrounding,
    BenchmarkScanrefer,
    BenchmarkMulti3drefer,
    BenchmarkScanqa,
    BenchmarkScan2cap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskGroup {
    Adversarial,
    Diverse,
    Benchmark,
}

impl TaskGroup {
    pub const ALL: [TaskGroup; 3] = [TaskGroup::Adversarial, TaskGroup::Diverse, TaskGroup::Benchmark];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskGroup::Adversarial => "adversarial",
            TaskGroup::Diverse => "diverse",
            TaskGroup::Benchmark => "benchmark",
        }
    }

    pub fn tasks(self) -> impl Iterator<Item = Task> {
        Task::ALL.into_iter().filter(move |t| t.group() == self)
    }
}

impl Task {
    pub const ALL: [Task; 14] = [
        Task::Hope,
        Task::Hroc,
        Task::Pf3dvg,
        Task::Fqa3d,
        Task::DiverseCategoryQa,
        Task::DiverseNr3dCaption,
        Task::DiverseAppearance,
        Task::DiverseRegion,
        Task::DiverseNr3dGrounding,
        Task::DiverseSr3dGrounding,
        Task::BenchmarkScanrefer,
        Task::BenchmarkMulti3drefer,
        Task::BenchmarkScanqa,
        Task::BenchmarkScan2cap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Hope => "hope",
            Task::Hroc => "hroc",
            Task::Pf3dvg => "pf3dvg",
            Task::Fqa3d => "fqa3d",
            Task::DiverseCategoryQa => "diverse_category_qa",
            Task::DiverseNr3dCaption => "diverse_nr3d_caption",
            Task::DiverseAppearance => "diverse_appearance",
            Task::DiverseRegion => "diverse_region",
            Task::DiverseNr3dGrounding => "diverse_nr3d_grounding",
            Task::DiverseSr3dGrounding => "diverse_sr3d_grounding",
            Task::BenchmarkScanrefer => "benchmark_scanrefer",
            Task::BenchmarkMulti3drefer => "benchmark_multi3drefer",
            Task::BenchmarkScanqa => "benchmark_scanqa",
            Task::BenchmarkScan2cap => "benchmark_scan2cap",
        }
    }

    pub fn group(self) -> TaskGroup {
        match self {
            Task::Hope | Task::Hroc | Task::Pf3dvg | Task::Fqa3d => TaskGroup::Adversarial,
            Task::DiverseCategoryQa
            | Task::DiverseNr3dCaption
            | Task::DiverseAppearance
            | Task::DiverseRegion
            | Task::DiverseNr3dGrounding
            | Task::DiverseSr3dGrounding => TaskGroup::Diverse,
            _ => TaskGroup::Benchmark,
        }
    }

    /// Finer reporting bucket used by the statistics output.
    pub fn reporting_bucket(self) -> &'static str {
        match self {
            Task::DiverseNr3dGrounding | Task::DiverseSr3dGrounding => "diverse_visual_grounding",
            Task::DiverseNr3dCaption | Task::DiverseAppearance | Task::DiverseRegion => {
                "diverse_captioning"
            }
            Task::DiverseCategoryQa => "diverse_question_answering",
            other => other.group().as_str(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task '{s}'"))
    }
}

fn id_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<OBJ(\d+)>").expect("valid pattern"))
}

/// Every `<OBJi>` occurrence in order, including repeats.
pub fn object_tokens_in(text: &str) -> Vec<ObjectId> {
    id_pattern()
        .captures_iter(text)
        .filter_map(|c| c[1].parse::<u32>().ok().map(ObjectId))
        .collect()
}

/// Distinct ids in order of first appearance.
pub fn object_ids_in(text: &str) -> Vec<ObjectId> {
    let mut out = Vec::new();
    for id in object_tokens_in(text) {
        if !out.contains(&id) {
            out.push(id);
        }
    }
    out
}

/// Replace every object token with a single space.
pub fn strip_object_tokens(text: &str) -> String {
    id_pattern().replace_all(text, " ").into_owned()
}

pub fn is_object_token(word: &str) -> bool {
    id_pattern()
        .find(word)
        .is_some_and(|m| m.start() == 0 && m.end() == word.len())
}

pub type Meta = BTreeMap<String, serde_json::Value>;

/// One training record. Field order is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionSample {
    pub sample_id: String,
    pub task: Task,
    pub scene_id: String,
    pub question: String,
    pub answer: String,
    pub question_object_ids: Vec<ObjectId>,
    pub answer_object_ids: Vec<ObjectId>,
    #[serde(default)]
    pub meta: Meta,
}

impl InstructionSample {
    pub fn new(
        sample_id: impl Into<String>,
        task: Task,
        scene_id: impl Into<String>,
        question: impl Into<String>,
        answer: impl Into<String>,
    ) -> Self {
        let question = question.into();
        let answer = answer.into();
        Self {
            sample_id: sample_id.into(),
            task,
            scene_id: scene_id.into(),
            question_object_ids: object_ids_in(&question),
            answer_object_ids: object_ids_in(&answer),
            question,
            answer,
            meta: Meta::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    /// Id lists that disagree with the tokens found in the text
    /// (first-appearance order).
    pub fn text_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (field, text, ids) in [
            ("question", &self.question, &self.question_object_ids),
            ("answer", &self.answer, &self.answer_object_ids),
        ] {
            let found = object_ids_in(text);
            if &found != ids {
                out.push(format!(
                    "{field}_object_ids {:?} do not match tokens in text {:?}",
                    ids.iter().map(|i| i.0).collect::<Vec<_>>(),
                    found.iter().map(|i| i.0).collect::<Vec<_>>()
                ));
            }
        }
        out
    }

    /// [`Self::text_violations`] plus scene checks: the scene must be known
    /// and contain every referenced id.
    pub fn violations(&self, scene: Option<&SceneGraph>) -> Vec<String> {
        let mut out = Vec::new();
        match scene {
            None => out.push(format!("unknown scene '{}'", self.scene_id)),
            Some(s) if s.scene_id() != self.scene_id => out.push(format!(
                "scene mismatch: sample says '{}', got '{}'",
                self.scene_id,
                s.scene_id()
            )),
            _ => {}
        }
        out.extend(self.text_violations());
        if let Some(s) = scene {
            for (field, ids) in [("question", &self.question_object_ids), ("answer", &self.answer_object_ids)] {
                for id in ids.iter().filter(|id| !s.contains(**id)) {
                    out.push(format!("{field} references missing object {}", id.0));
                }
            }
        }
        out
    }
}
