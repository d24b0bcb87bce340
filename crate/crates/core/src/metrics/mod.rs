//! Grounding and question-answering metrics.

pub mod answer;
pub mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sample::strip_object_tokens;
use crate::scene::{iou, Aabb3, ObjectId, SceneGraph};

pub use answer::{parse_answer, AnswerSegment, GroundedAnswer, Verdict};
pub use report::{evaluate, EvalOptions, EvalReport, Prediction};

/// Thresholds reported by default.
pub const IOU_THRESHOLDS: [f64; 2] = [0.25, 0.5];

/// Scenes by id.
#[derive(Debug, Clone, Default)]
pub struct SceneIndex<'a> {
    scenes: BTreeMap<&'a str, &'a SceneGraph>,
}

impl<'a> SceneIndex<'a> {
    pub fn new(scenes: impl IntoIterator<Item = &'a SceneGraph>) -> Self {
        Self {
            scenes: scenes.into_iter().map(|s| (s.scene_id(), s)).collect(),
        }
    }

    pub fn get(&self, scene_id: &str) -> Option<&'a SceneGraph> {
        self.scenes.get(scene_id).copied()
    }
}

/// One grounding sample: predicted ids against ground-truth ids in a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingItem {
    pub sample_id: String,
    pub scene_id: String,
    pub predicted: Vec<ObjectId>,
    pub ground_truth: Vec<ObjectId>,
}

/// Mean of per-item scores plus the per-item values themselves.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub per_item: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl Score {
    fn from_items(per_item: Vec<f64>, diagnostics: Vec<String>) -> Self {
        let value = if per_item.is_empty() {
            0.0
        } else {
            per_item.iter().sum::<f64>() / per_item.len() as f64
        };
        Self {
            value,
            per_item,
            diagnostics,
        }
    }
}

fn resolve_box(scene: Option<&SceneGraph>, id: ObjectId) -> Option<Aabb3> {
    scene.and_then(|s| s.object(id)).map(|o| o.bbox)
}

/// Single-target accuracy: the first predicted id's box must reach `threshold`
/// IoU with the ground-truth box. Extra predicted ids are ignored and noted.
pub fn grounding_accuracy(items: &[GroundingItem], scenes: &SceneIndex<'_>, threshold: f64) -> Score {
    let mut diagnostics = Vec::new();
    let per_item = items
        .iter()
        .map(|item| {
            let scene = scenes.get(&item.scene_id);
            if scene.is_none() {
                diagnostics.push(format!("{}: unknown scene '{}'", item.sample_id, item.scene_id));
            }
            if item.ground_truth.len() != 1 {
                diagnostics.push(format!(
                    "{}: expected one ground-truth id, got {}",
                    item.sample_id,
                    item.ground_truth.len()
                ));
            }
            if item.predicted.len() > 1 {
                diagnostics.push(format!(
                    "{}: {} predicted ids, scoring the first",
                    item.sample_id,
                    item.predicted.len()
                ));
            }
            let (Some(&gt), Some(&pred)) = (item.ground_truth.first(), item.predicted.first()) else {
                return 0.0;
            };
            let (Some(gt_box), Some(pred_box)) = (resolve_box(scene, gt), resolve_box(scene, pred)) else {
                diagnostics.push(format!("{}: unresolvable id", item.sample_id));
                return 0.0;
            };
            if iou(&pred_box, &gt_box) >= threshold {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Score::from_items(per_item, diagnostics)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// Pairs taken in descending IoU order.
    #[default]
    Greedy,
    /// Maximum-cardinality bipartite matching.
    Optimal,
}

/// Match counts for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl MatchCounts {
    /// Per-sample F1; an empty prediction against an empty ground truth is a
    /// correct answer and scores 1.
    pub fn f1(&self) -> f64 {
        if self.tp + self.fp + self.fn_ == 0 {
            return 1.0;
        }
        if self.tp == 0 {
            return 0.0;
        }
        let p = self.tp as f64 / (self.tp + self.fp) as f64;
        let r = self.tp as f64 / (self.tp + self.fn_) as f64;
        2.0 * p * r / (p + r)
    }
}

/// Count matches between predicted and ground-truth boxes at `threshold`.
pub fn match_boxes(pred: &[Aabb3], gt: &[Aabb3], threshold: f64, matching: Matching) -> MatchCounts {
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, p) in pred.iter().enumerate() {
        for (gi, g) in gt.iter().enumerate() {
            let v = iou(p, g);
            if v >= threshold {
                edges.push((v, pi, gi));
            }
        }
    }
    let tp = match matching {
        Matching::Greedy => {
            edges.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut pred_used = vec![false; pred.len()];
            let mut gt_used = vec![false; gt.len()];
            let mut tp = 0;
            for (_, pi, gi) in edges {
                if !pred_used[pi] && !gt_used[gi] {
                    pred_used[pi] = true;
                    gt_used[gi] = true;
                    tp += 1;
                }
            }
            tp
        }
        Matching::Optimal => max_bipartite(pred.len(), gt.len(), &edges),
    };
    MatchCounts {
        tp,
        fp: pred.len() - tp,
        fn_: gt.len() - tp,
    }
}

// Kuhn's augmenting-path algorithm.
fn max_bipartite(n_left: usize, n_right: usize, edges: &[(f64, usize, usize)]) -> usize {
    let mut adj = vec![Vec::new(); n_left];
    for &(_, l, r) in edges {
        adj[l].push(r);
    }
    fn augment(l: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &r in &adj[l] {
            if seen[r] {
                continue;
            }
            seen[r] = true;
            if owner[r].is_none_or(|o| augment(o, adj, seen, owner)) {
                owner[r] = Some(l);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; n_right];
    (0..n_left)
        .filter(|&l| {
            let mut seen = vec![false; n_right];
            augment(l, &adj, &mut seen, &mut owner)
        })
        .count()
}

/// Mean per-sample F1 over zero-, single- and multi-target samples.
pub fn grounding_f1(
    items: &[GroundingItem],
    scenes: &SceneIndex<'_>,
    threshold: f64,
    matching: Matching,
) -> Score {
    let mut diagnostics = Vec::new();
    let per_item = items
        .iter()
        .map(|item| {
            let scene = scenes.get(&item.scene_id);
            if scene.is_none() {
                diagnostics.push(format!("{}: unknown scene '{}'", item.sample_id, item.scene_id));
            }
            let mut pred_ids: Vec<ObjectId> = Vec::new();
            for id in &item.predicted {
                if pred_ids.contains(id) {
                    diagnostics.push(format!("{}: duplicate predicted id {}", item.sample_id, id.0));
                } else {
                    pred_ids.push(*id);
                }
            }
            let mut unresolved_pred = 0;
            let pred_boxes: Vec<Aabb3> = pred_ids
                .iter()
                .filter_map(|&id| {
                    let b = resolve_box(scene, id);
                    if b.is_none() {
                        unresolved_pred += 1;
                        diagnostics.push(format!("{}: unresolvable predicted id {}", item.sample_id, id.0));
                    }
                    b
                })
                .collect();
            let mut unresolved_gt = 0;
            let gt_boxes: Vec<Aabb3> = item
                .ground_truth
                .iter()
                .filter_map(|&id| {
                    let b = resolve_box(scene, id);
                    if b.is_none() {
                        unresolved_gt += 1;
                        diagnostics.push(format!("{}: unresolvable ground-truth id {}", item.sample_id, id.0));
                    }
                    b
                })
                .collect();
            let mut counts = match_boxes(&pred_boxes, &gt_boxes, threshold, matching);
            counts.fp += unresolved_pred;
            counts.fn_ += unresolved_gt;
            counts.f1()
        })
        .collect();
    Score::from_items(per_item, diagnostics)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactMatch {
    pub em: bool,
    pub em_r: bool,
}

/// Lowercase, drop object tokens and punctuation, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let stripped = strip_object_tokens(text).to_lowercase();
    let kept: String = stripped
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Exact match, and the refined form that also accepts a prediction
/// containing a reference answer.
pub fn exact_match(pred: &str, gts: &[String], refined_substring: bool) -> ExactMatch {
    let p = normalize_answer(pred);
    let normalized: Vec<String> = gts.iter().map(|g| normalize_answer(g)).collect();
    let em = normalized.contains(&p);
    let em_r = em
        || (refined_substring && normalized.iter().any(|g| !g.is_empty() && p.contains(g.as_str())));
    ExactMatch { em, em_r }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::ObjectInstance;

    fn scene() -> SceneGraph {
        let mk = |id: u32, min: [f64; 3], max: [f64; 3]| ObjectInstance {
            object_id: ObjectId(id),
            category: "thing".into(),
            bbox: Aabb3::new(min, max).unwrap(),
        };
        SceneGraph::new(
            "s",
            vec![
                mk(1, [0.0; 3], [2.0; 3]),
                mk(2, [1.0, 0.0, 0.0], [3.0, 2.0, 2.0]),
                mk(3, [10.0; 3], [11.0; 3]),
                mk(4, [20.0; 3], [21.0; 3]),
            ],
            150,
        )
        .unwrap()
    }

    fn item(pred: &[u32], gt: &[u32]) -> GroundingItem {
        GroundingItem {
            sample_id: "x".into(),
            scene_id: "s".into(),
            predicted: pred.iter().map(|&i| ObjectId(i)).collect(),
            ground_truth: gt.iter().map(|&i| ObjectId(i)).collect(),
        }
    }

    #[test]
    fn accuracy_thresholds() {
        let s = scene();
        let idx = SceneIndex::new([&s]);
        assert_eq!(grounding_accuracy(&[item(&[1], &[1])], &idx, 0.5).value, 1.0);
        // IoU exactly 1/3
        assert_eq!(grounding_accuracy(&[item(&[2], &[1])], &idx, 0.25).value, 1.0);
        assert_eq!(grounding_accuracy(&[item(&[2], &[1])], &idx, 0.5).value, 0.0);
        assert_eq!(grounding_accuracy(&[item(&[], &[1])], &idx, 0.25).value, 0.0);
        let s = grounding_accuracy(&[item(&[99], &[1])], &idx, 0.25);
        assert_eq!(s.value, 0.0);
        assert!(!s.diagnostics.is_empty());
    }

    #[test]
    fn f1_cases() {
        let s = scene();
        let idx = SceneIndex::new([&s]);
        let f = |p: &[u32], g: &[u32]| grounding_f1(&[item(p, g)], &idx, 0.5, Matching::Greedy).value;
        assert_eq!(f(&[], &[]), 1.0);
        assert!((f(&[3], &[3, 4]) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f(&[3], &[4]), 0.0);
        assert_eq!(f(&[3], &[]), 0.0);
        assert_eq!(f(&[], &[3]), 0.0);
        let dup = grounding_f1(&[item(&[3, 3], &[3])], &idx, 0.5, Matching::Greedy);
        assert_eq!(dup.value, 1.0);
        assert_eq!(dup.diagnostics.len(), 1);
    }

    #[test]
    fn optimal_beats_greedy_on_crossed_pairs() {
        // p0 overlaps both gts (best with g0), p1 only overlaps g0
        let b = |x0: f64, x1: f64| Aabb3::new([x0, 0.0, 0.0], [x1, 1.0, 1.0]).unwrap();
        let g = [b(0.0, 1.0), b(0.8, 1.8)];
        let p = [b(0.3, 1.3), b(-0.5, 0.6)];
        let greedy = match_boxes(&p, &g, 0.2, Matching::Greedy);
        let optimal = match_boxes(&p, &g, 0.2, Matching::Optimal);
        assert_eq!(greedy.tp, 1);
        assert_eq!(optimal.tp, 2);
    }

    #[test]
    fn exact_match_rules() {
        let gts = |s: &str| vec![s.to_string()];
        assert_eq!(exact_match("Brown.", &gts("brown"), true), ExactMatch { em: true, em_r: true });
        assert_eq!(
            exact_match("it is brown and wooden", &gts("brown"), true),
            ExactMatch { em: false, em_r: true }
        );
        assert_eq!(exact_match("blue", &gts("brown"), true), ExactMatch { em: false, em_r: false });
        assert_eq!(
            exact_match("it is brown and wooden", &gts("brown"), false),
            ExactMatch { em: false, em_r: false }
        );
        assert!(exact_match("brown <OBJ004>", &gts("Brown"), true).em);
        assert!(!exact_match("anything", &gts("!!"), true).em_r);
    }
}
