use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    exact_match, grounding_accuracy, grounding_f1, parse_answer, GroundingItem, Matching, SceneIndex,
    IOU_THRESHOLDS,
};
use crate::sample::{InstructionSample, Task};

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub answer_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    F1,
    ExactMatch,
}

/// Which metrics a task is scored with.
pub fn metrics_for(task: Task) -> &'static [MetricKind] {
    match task {
        Task::BenchmarkScanrefer | Task::DiverseNr3dGrounding | Task::DiverseSr3dGrounding => {
            &[MetricKind::Accuracy]
        }
        Task::BenchmarkMulti3drefer | Task::Pf3dvg => &[MetricKind::F1],
        Task::Fqa3d => &[MetricKind::F1, MetricKind::ExactMatch],
        Task::BenchmarkScanqa | Task::DiverseCategoryQa => &[MetricKind::ExactMatch],
        _ => &[],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub thresholds: [f64; 2],
    pub matching: Matching,
    /// Substring rule for EM-R; when false EM-R equals EM.
    pub refined_substring: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            thresholds: IOU_THRESHOLDS,
            matching: Matching::Greedy,
            refined_substring: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleRow {
    pub sample_id: String,
    pub task: Option<Task>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub acc: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub f1: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub em: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub em_r: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc_at: BTreeMap<String, f64>,
    pub f1_at: BTreeMap<String, f64>,
    pub em: f64,
    pub em_r: f64,
    pub n_acc: usize,
    pub n_f1: usize,
    pub n_em: usize,
    pub unscored: usize,
    pub rows: Vec<SampleRow>,
    pub diagnostics: Vec<String>,
}

fn key(t: f64) -> String {
    format!("{t}")
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Score predictions against a dataset. A sample without a prediction is
/// scored as an empty answer.
pub fn evaluate(
    samples: &[InstructionSample],
    predictions: &[Prediction],
    scenes: &SceneIndex<'_>,
    opts: &EvalOptions,
) -> EvalReport {
    let by_id: BTreeMap<&str, &str> = predictions
        .iter()
        .map(|p| (p.sample_id.as_str(), p.answer_text.as_str()))
        .collect();
    let mut report = EvalReport::default();
    let known: BTreeMap<&str, ()> = samples.iter().map(|s| (s.sample_id.as_str(), ())).collect();
    for p in predictions {
        if !known.contains_key(p.sample_id.as_str()) {
            report
                .diagnostics
                .push(format!("{}: prediction for unknown sample", p.sample_id));
        }
    }

    for sample in samples {
        let kinds = metrics_for(sample.task);
        if kinds.is_empty() {
            report.unscored += 1;
            continue;
        }
        let pred_text = by_id.get(sample.sample_id.as_str()).copied().unwrap_or_else(|| {
            report
                .diagnostics
                .push(format!("{}: no prediction", sample.sample_id));
            ""
        });
        let parsed = parse_answer(pred_text);
        for d in &parsed.diagnostics {
            report.diagnostics.push(format!("{}: {d}", sample.sample_id));
        }
        let item = GroundingItem {
            sample_id: sample.sample_id.clone(),
            scene_id: sample.scene_id.clone(),
            predicted: parsed.ids(),
            ground_truth: sample.answer_object_ids.clone(),
        };
        let mut row = SampleRow {
            sample_id: sample.sample_id.clone(),
            task: Some(sample.task),
            ..Default::default()
        };
        for kind in kinds {
            match kind {
                MetricKind::Accuracy => {
                    for t in opts.thresholds {
                        let s = grounding_accuracy(std::slice::from_ref(&item), scenes, t);
                        report.diagnostics.extend(s.diagnostics);
                        row.acc.insert(key(t), s.value);
                    }
                }
                MetricKind::F1 => {
                    for t in opts.thresholds {
                        let s = grounding_f1(std::slice::from_ref(&item), scenes, t, opts.matching);
                        report.diagnostics.extend(s.diagnostics);
                        row.f1.insert(key(t), s.value);
                    }
                }
                MetricKind::ExactMatch => {
                    let m = exact_match(
                        pred_text,
                        std::slice::from_ref(&sample.answer),
                        opts.refined_substring,
                    );
                    row.em = Some(m.em);
                    row.em_r = Some(m.em_r);
                }
            }
        }
        report.rows.push(row);
    }
    report.diagnostics.sort();
    report.diagnostics.dedup();

    for t in opts.thresholds {
        let k = key(t);
        report.acc_at.insert(
            k.clone(),
            mean(report.rows.iter().filter_map(|r| r.acc.get(&k).copied())),
        );
        report.f1_at.insert(
            k.clone(),
            mean(report.rows.iter().filter_map(|r| r.f1.get(&k).copied())),
        );
    }
    report.n_acc = report.rows.iter().filter(|r| !r.acc.is_empty()).count();
    report.n_f1 = report.rows.iter().filter(|r| !r.f1.is_empty()).count();
    report.n_em = report.rows.iter().filter(|r| r.em.is_some()).count();
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    report.em = mean(report.rows.iter().filter_map(|r| r.em.map(b)));
    report.em_r = mean(report.rows.iter().filter_map(|r| r.em_r.map(b)));
    report
}

impl EvalReport {
    /// Aligned plain-text summary table.
    pub fn table(&self) -> String {
        let mut lines: Vec<(String, usize, f64)> = Vec::new();
        for (t, v) in &self.acc_at {
            lines.push((format!("Acc@{t}"), self.n_acc, *v));
        }
        for (t, v) in &self.f1_at {
            lines.push((format!("F1@{t}"), self.n_f1, *v));
        }
        lines.push(("EM".into(), self.n_em, self.em));
        lines.push(("EM-R".into(), self.n_em, self.em_r));
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>8} {:>8}", "metric", "n", "value");
        for (name, n, v) in lines {
            let _ = writeln!(out, "{name:<10} {n:>8} {v:>8.4}");
        }
        let _ = writeln!(out, "{:<10} {:>8}", "unscored", self.unscored);
        out
    }
}
