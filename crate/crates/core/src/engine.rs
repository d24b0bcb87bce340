//! Quota-driven generation over a resolved corpus.
//!
//! Adversarial tasks cycle through their eligible sources and can produce any
//! number of samples. Diverse and benchmark tasks produce at most one sample
//! per source record; a smaller quota takes a seeded subset kept in source
//! order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversarial::{
    fqa_negative_scenes, gen_3dfqa, gen_hope, gen_hroc, gen_pf3dvg, hroc_candidates, pf_candidates, GenConfig,
    GenError, PfBranch,
};
use crate::benchmark;
use crate::corpus::{CaptionKind, Corpus};
use crate::diverse::transform::{caption_source, transform, SourceRecord, TransformError};
use crate::rng::stream;
use crate::sample::{InstructionSample, Task};
use crate::scene::SceneGraph;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("{task}: requested {requested} samples but at most {available} can be built from this corpus")]
    Shortfall {
        task: Task,
        requested: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "max")]
pub enum Capacity {
    Unbounded,
    Finite(usize),
}

impl Capacity {
    pub fn admits(self, n: usize) -> bool {
        match self {
            Capacity::Unbounded => true,
            Capacity::Finite(m) => n <= m,
        }
    }

    pub fn max(self) -> Option<usize> {
        match self {
            Capacity::Unbounded => None,
            Capacity::Finite(m) => Some(m),
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Unbounded => f.write_str("unbounded"),
            Capacity::Finite(m) => write!(f, "{m}"),
        }
    }
}

/// Generated samples plus notes on sources that could not be used.
#[derive(Debug, Clone, Default)]
pub struct Generated {
    pub samples: Vec<InstructionSample>,
    pub skipped: Vec<String>,
}

/// Whether every HOPE draw on a scene with these pool sizes is satisfiable,
/// so the realized negative mix is not biased by rejections.
pub fn hope_feasible(present: usize, absent: usize, cfg: &GenConfig) -> bool {
    if present == 0 {
        return false;
    }
    (cfg.hope_queries_min..=cfg.hope_queries_max).all(|k| {
        let exact = k as f64 * cfg.hope_negative_fraction;
        let lo = exact.floor() as usize;
        let hi = (exact.ceil() as usize).min(k);
        (lo..=hi).all(|mut n_absent| {
            if k >= 2 && absent > 0 {
                n_absent = n_absent.clamp(1, k - 1);
            }
            present >= k - n_absent && absent >= n_absent
        })
    })
}

fn hope_sources<'a>(corpus: &'a Corpus, pool: &BTreeSet<String>, cfg: &GenConfig) -> Vec<&'a SceneGraph> {
    corpus
        .scenes
        .iter()
        .filter(|s| {
            let present = s.category_index().len();
            let absent = pool.iter().filter(|c| !s.has_category(c)).count();
            hope_feasible(present, absent, cfg)
        })
        .collect()
}

fn hroc_sources<'a>(corpus: &'a Corpus, cfg: &GenConfig) -> Vec<&'a SceneGraph> {
    corpus
        .scenes
        .iter()
        .filter(|s| {
            s.category_index().len() >= 2 && hroc_candidates(s, cfg.hroc_overlap_iou).len() >= cfg.hroc_pairs_max
        })
        .collect()
}

fn pf_sources<'a>(corpus: &'a Corpus, cfg: &GenConfig) -> Vec<&'a SceneGraph> {
    let weights = [
        (PfBranch::Unfactual, cfg.pf_unfactual_weight),
        (PfBranch::PartialFactual, cfg.pf_partial_weight),
        (PfBranch::Factual, cfg.pf_factual_weight),
    ];
    corpus
        .scenes
        .iter()
        .filter(|s| {
            weights
                .iter()
                .filter(|(_, w)| *w > 0.0)
                .all(|(b, _)| !pf_candidates(s, &corpus.refs, &corpus.lexicon, *b).is_empty())
        })
        .collect()
}

fn fqa_sources(corpus: &Corpus, cfg: &GenConfig) -> (Vec<usize>, Vec<String>) {
    let mut keep = Vec::new();
    let mut skipped = Vec::new();
    for (i, r) in corpus.qa.iter().enumerate() {
        if cfg.fqa_negative_fraction > 0.0 && fqa_negative_scenes(&corpus.scenes, r).is_empty() {
            skipped.push(format!(
                "fqa3d: QA record {i} ({}) skipped, no scene lacks {:?}",
                r.scene_id, r.related_categories
            ));
        } else {
            keep.push(i);
        }
    }
    (keep, skipped)
}

fn record_samples(corpus: &Corpus, task: Task) -> (Vec<InstructionSample>, Vec<String>) {
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    let mut push = |r: Result<InstructionSample, TransformError>, what: String| match r {
        Ok(s) => out.push(s),
        Err(e) => skipped.push(format!("{task}: {what} skipped, {e}")),
    };
    let scene = |id: &str| corpus.scene(id).expect("resolved corpus");
    match task {
        Task::DiverseSr3dGrounding => {
            for (i, r) in corpus.refs.iter().enumerate() {
                push(
                    transform(task, SourceRecord::Sr3d(r), scene(&r.scene_id), String::new()),
                    format!("reference {i}"),
                );
            }
        }
        t if caption_source(t).is_some() => {
            let kind = caption_source(t).expect("checked");
            for (i, c) in corpus.captions.iter().enumerate().filter(|(_, c)| c.kind == kind) {
                push(
                    transform(task, SourceRecord::Caption(c), scene(&c.scene_id), String::new()),
                    format!("caption {i}"),
                );
            }
        }
        Task::BenchmarkScanrefer | Task::BenchmarkScan2cap => {
            for (i, c) in corpus
                .captions
                .iter()
                .enumerate()
                .filter(|(_, c)| c.kind == CaptionKind::Appearance)
            {
                let s = scene(&c.scene_id);
                let r = if task == Task::BenchmarkScanrefer {
                    benchmark::scanrefer(c, s, String::new())
                } else {
                    benchmark::scan2cap(c, s, String::new())
                };
                push(r, format!("caption {i}"));
            }
        }
        Task::BenchmarkScanqa => {
            for (i, q) in corpus.qa.iter().enumerate() {
                push(benchmark::scanqa(q, scene(&q.scene_id), String::new()), format!("QA record {i}"));
            }
        }
        Task::BenchmarkMulti3drefer => {
            let pool = corpus.category_pool();
            for s in &corpus.scenes {
                for c in &pool {
                    out.push(benchmark::multi3drefer(s, c, String::new()));
                }
            }
        }
        _ => unreachable!("{task} is not record-backed"),
    }
    (out, skipped)
}

fn is_record_backed(task: Task) -> bool {
    !matches!(task, Task::Hope | Task::Hroc | Task::Pf3dvg | Task::Fqa3d)
}

/// How many samples of each task the corpus supports.
pub fn capacities(corpus: &Corpus, cfg: &GenConfig) -> BTreeMap<Task, Capacity> {
    let pool = corpus.category_pool();
    Task::ALL
        .into_iter()
        .map(|t| {
            let n = match t {
                Task::Hope => hope_sources(corpus, &pool, cfg).len(),
                Task::Hroc => hroc_sources(corpus, cfg).len(),
                Task::Pf3dvg => pf_sources(corpus, cfg).len(),
                Task::Fqa3d => fqa_sources(corpus, cfg).0.len(),
                _ => record_samples(corpus, t).0.len(),
            };
            let cap = if is_record_backed(t) {
                Capacity::Finite(n)
            } else if n > 0 {
                Capacity::Unbounded
            } else {
                Capacity::Finite(0)
            };
            (t, cap)
        })
        .collect()
}

pub fn sample_id(task: Task, k: usize) -> String {
    format!("{task}-{k:06}")
}

/// Cycle through `sources`; sample `k` draws from stream
/// `(seed, task, key(source), k / len)`.
fn cycle<S: Sync>(
    task: Task,
    quota: usize,
    sources: &[S],
    seed: u64,
    key: impl Fn(&S) -> String + Sync,
    make: impl Fn(&S, &mut crate::rng::Stream, String) -> Result<InstructionSample, GenError> + Sync,
) -> Result<Vec<InstructionSample>, EngineError> {
    if quota == 0 {
        return Ok(Vec::new());
    }
    if sources.is_empty() {
        return Err(EngineError::Shortfall {
            task,
            requested: quota,
            available: 0,
        });
    }
    (0..quota)
        .into_par_iter()
        .map(|k| {
            let src = &sources[k % sources.len()];
            let round = (k / sources.len()) as u64;
            let mut rng = stream(seed, task.as_str(), &key(src), round);
            make(src, &mut rng, sample_id(task, k)).map_err(EngineError::from)
        })
        .collect()
}

/// Generate `quota` samples of one task.
pub fn generate_task(
    corpus: &Corpus,
    cfg: &GenConfig,
    task: Task,
    quota: usize,
) -> Result<Generated, EngineError> {
    let seed = cfg.seed;
    let mut skipped = Vec::new();
    let samples = match task {
        Task::Hope => {
            let pool = corpus.category_pool();
            let src = hope_sources(corpus, &pool, cfg);
            cycle(task, quota, &src, seed, |s| s.scene_id().to_string(), |s, rng, id| {
                gen_hope(s, &pool, cfg, rng, id)
            })?
        }
        Task::Hroc => {
            let src = hroc_sources(corpus, cfg);
            cycle(task, quota, &src, seed, |s| s.scene_id().to_string(), |s, rng, id| {
                gen_hroc(s, cfg, rng, id)
            })?
        }
        Task::Pf3dvg => {
            let src = pf_sources(corpus, cfg);
            cycle(task, quota, &src, seed, |s| s.scene_id().to_string(), |s, rng, id| {
                gen_pf3dvg(s, &corpus.refs, &corpus.lexicon, cfg, rng, id)
            })?
        }
        Task::Fqa3d => {
            let (src, notes) = fqa_sources(corpus, cfg);
            skipped.extend(notes);
            cycle(
                task,
                quota,
                &src,
                seed,
                |i| format!("{}#{i}", corpus.qa[*i].scene_id),
                |i, rng, id| gen_3dfqa(&corpus.scenes, &corpus.qa[*i], cfg, rng, id),
            )?
        }
        _ => {
            let (all, notes) = record_samples(corpus, task);
            skipped.extend(notes);
            if quota > all.len() {
                return Err(EngineError::Shortfall {
                    task,
                    requested: quota,
                    available: all.len(),
                });
            }
            let chosen: Vec<usize> = if quota == all.len() {
                (0..quota).collect()
            } else {
                let mut rng = stream(seed, task.as_str(), "subset", 0);
                let mut idx = sample_indices(&mut rng, all.len(), quota).into_vec();
                idx.sort_unstable();
                idx
            };
            chosen
                .into_iter()
                .enumerate()
                .map(|(k, i)| {
                    let mut s = all[i].clone();
                    s.sample_id = sample_id(task, k);
                    s
                })
                .collect()
        }
    };
    Ok(Generated { samples, skipped })
}

/// Generate every task with a non-zero quota, in task order.
pub fn generate(corpus: &Corpus, cfg: &GenConfig) -> Result<Generated, EngineError> {
    cfg.validate()?;
    let mut out = Generated::default();
    for task in Task::ALL {
        let quota = cfg.quotas.get(&task).copied().unwrap_or(0);
        if quota == 0 {
            continue;
        }
        let g = generate_task(corpus, cfg, task, quota)?;
        out.samples.extend(g.samples);
        out.skipped.extend(g.skipped);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hope_feasibility_is_exact() {
        let cfg = GenConfig::default();
        // k = 6 with half negatives needs 3 + 3; k = 5 may need 3 of either
        assert!(hope_feasible(3, 3, &cfg));
        assert!(!hope_feasible(2, 10, &cfg));
        assert!(!hope_feasible(10, 2, &cfg));
        assert!(!hope_feasible(0, 10, &cfg));
        let all_neg = GenConfig { hope_negative_fraction: 1.0, ..GenConfig::default() };
        // clamped to keep one present query
        assert!(hope_feasible(1, 5, &all_neg));
    }

    #[test]
    fn capacity_display() {
        assert_eq!(Capacity::Finite(3).to_string(), "3");
        assert!(Capacity::Unbounded.admits(1 << 40));
        assert!(!Capacity::Finite(2).admits(3));
    }
}
