//! Sentence-length and word-frequency statistics.
//!
//! A word is a whitespace-separated run that still contains a letter or digit
//! once object tokens are removed. Length of a sample is the word count of
//! its question plus its answer.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DatasetManifest;
use crate::sample::{strip_object_tokens, InstructionSample, Task, TaskGroup};

pub fn words(text: &str) -> Vec<String> {
    strip_object_tokens(text)
        .split_whitespace()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .map(str::to_string)
        .collect()
}

pub fn word_count(text: &str) -> usize {
    words(text).len()
}

pub fn sentence_length(sample: &InstructionSample) -> usize {
    word_count(&sample.question) + word_count(&sample.answer)
}

/// Lowercased word with leading and trailing punctuation removed.
pub fn frequency_key(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub samples: usize,
    pub total_words: usize,
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

impl LengthStats {
    fn add(&mut self, n: usize) {
        if self.samples == 0 {
            self.min = n;
            self.max = n;
        }
        self.samples += 1;
        self.total_words += n;
        self.min = self.min.min(n);
        self.max = self.max.max(n);
        self.mean = self.total_words as f64 / self.samples as f64;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub samples: usize,
    pub length_by_task: BTreeMap<Task, LengthStats>,
    pub length_by_group: BTreeMap<TaskGroup, LengthStats>,
    /// Most frequent words per group, descending count then alphabetical.
    pub word_frequency: BTreeMap<TaskGroup, Vec<(String, usize)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<DatasetManifest>,
}

fn top(counts: BTreeMap<String, usize>, k: usize) -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

pub fn compute_stats(samples: &[InstructionSample], top_k: usize, manifest: Option<DatasetManifest>) -> StatsReport {
    // per-sample work is independent; merge is in input order
    let per: Vec<(Task, usize, Vec<String>)> = samples
        .par_iter()
        .map(|s| {
            let mut ws = words(&s.question);
            ws.extend(words(&s.answer));
            let n = ws.len();
            let keys = ws.iter().map(|w| frequency_key(w)).filter(|k| !k.is_empty()).collect();
            (s.task, n, keys)
        })
        .collect();
    let mut report = StatsReport {
        samples: samples.len(),
        manifest,
        ..StatsReport::default()
    };
    let mut freq: BTreeMap<TaskGroup, BTreeMap<String, usize>> = BTreeMap::new();
    for (task, n, keys) in per {
        report.length_by_task.entry(task).or_default().add(n);
        report.length_by_group.entry(task.group()).or_default().add(n);
        let table = freq.entry(task.group()).or_default();
        for k in keys {
            *table.entry(k).or_default() += 1;
        }
    }
    report.word_frequency = freq.into_iter().map(|(g, c)| (g, top(c, top_k))).collect();
    report
}

impl StatsReport {
    /// Plain-text tables for terminal output.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<26} {:>8} {:>10} {:>6} {:>6}", "task", "samples", "avg_len", "min", "max");
        for (t, s) in &self.length_by_task {
            let _ = writeln!(out, "{:<26} {:>8} {:>10.3} {:>6} {:>6}", t.as_str(), s.samples, s.mean, s.min, s.max);
        }
        for (g, s) in &self.length_by_group {
            let _ = writeln!(
                out,
                "{:<26} {:>8} {:>10.3} {:>6} {:>6}",
                format!("[{}]", g.as_str()),
                s.samples,
                s.mean,
                s.min,
                s.max
            );
        }
        for (g, words) in &self.word_frequency {
            let _ = writeln!(out, "\ntop words: {}", g.as_str());
            for (w, n) in words {
                let _ = writeln!(out, "  {w:<20} {n}");
            }
        }
        out
    }
}
