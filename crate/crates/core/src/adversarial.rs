//! Adversarial task generators: object probing (HOPE), referring object
//! classification (HROC), partial-factual grounding (PF-3DVG) and faithful
//! QA (3DFQA).
//!
//! Every generator is a pure function of its inputs and the supplied random
//! stream.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::corpus::{QaRecord, RelationLexicon, Sr3dReference};
use crate::metrics::answer::{render_segments, AnswerSegment};
use crate::rng::randomized_round;
use crate::sample::{InstructionSample, Task};
use crate::scene::{iou, ObjectId, SceneGraph, DEFAULT_MAX_OBJECTS};

pub const HOPE_PROMPT: &str =
    "Are the following objects present in the scene? For each one, answer Yes with the ID of every instance, or No: ";
pub const HROC_PROMPT: &str =
    "Does each object ID match the paired category? For each pair, answer Yes, or No with the correct category: ";
pub const FQA_INSTRUCTION: &str =
    "If you can, answer the question based on the objects in the scene and provide all the IDs";

/// `"a chair"`, `"an armchair"`.
pub fn with_article(noun: &str) -> String {
    let vowel = noun
        .chars()
        .next()
        .is_some_and(|c| "aeiouAEIOU".contains(c));
    format!("{} {noun}", if vowel { "an" } else { "a" })
}

/// Question wrapper for description-based grounding.
pub fn grounding_question(description: &str) -> String {
    format!(
        "According to the given description, \"{description}\", please provide the ID of the object that closely matches this description."
    )
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("scene {0} is empty")]
    EmptyScene(String),
    #[error("scene {scene}: category pool too small ({present} present, {absent} absent available; need {need_present}/{need_absent})")]
    CategoryPoolTooSmall {
        scene: String,
        present: usize,
        absent: usize,
        need_present: usize,
        need_absent: usize,
    },
    #[error("scene {0} has fewer than 2 categories")]
    TooFewCategories(String),
    #[error("scene {scene}: id pool exhausted ({available} eligible ids, need {needed})")]
    IdPoolExhausted {
        scene: String,
        available: usize,
        needed: usize,
    },
    #[error("scene {scene}: no eligible reference for the {branch} branch")]
    NoEligibleReference { scene: String, branch: &'static str },
    #[error("relation '{0}' has no synonym to substitute")]
    EmptySynonymSet(String),
    #[error("no scene in the pool lacks all of {0:?}")]
    NoNegativeScene(Vec<String>),
    #[error("QA record references ids missing from scene {0}")]
    UnresolvableIds(String),
}

/// Knobs for the adversarial generators plus per-task quotas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub max_objects: usize,
    pub hope_queries_min: usize,
    pub hope_queries_max: usize,
    pub hope_negative_fraction: f64,
    pub hroc_pairs_min: usize,
    pub hroc_pairs_max: usize,
    pub hroc_negative_fraction: f64,
    /// IoU a candidate box needs with a ground-truth box to inherit its label.
    pub hroc_overlap_iou: f64,
    pub pf_unfactual_weight: f64,
    pub pf_partial_weight: f64,
    pub pf_factual_weight: f64,
    pub fqa_negative_fraction: f64,
    pub quotas: BTreeMap<Task, usize>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_objects: DEFAULT_MAX_OBJECTS,
            hope_queries_min: 3,
            hope_queries_max: 6,
            hope_negative_fraction: 0.5,
            hroc_pairs_min: 3,
            hroc_pairs_max: 6,
            hroc_negative_fraction: 0.5,
            hroc_overlap_iou: 0.5,
            pf_unfactual_weight: 1.0 / 3.0,
            pf_partial_weight: 1.0 / 3.0,
            pf_factual_weight: 1.0 / 3.0,
            fqa_negative_fraction: 0.5,
            quotas: BTreeMap::new(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let fractions = [
            ("hope_negative_fraction", self.hope_negative_fraction),
            ("hroc_negative_fraction", self.hroc_negative_fraction),
            ("hroc_overlap_iou", self.hroc_overlap_iou),
            ("fqa_negative_fraction", self.fqa_negative_fraction),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(GenError::Config(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        let weights = [self.pf_unfactual_weight, self.pf_partial_weight, self.pf_factual_weight];
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(GenError::Config("pf weights must be non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GenError::Config(format!("pf weights sum to {sum}, expected 1")));
        }
        for (name, lo, hi) in [
            ("hope_queries", self.hope_queries_min, self.hope_queries_max),
            ("hroc_pairs", self.hroc_pairs_min, self.hroc_pairs_max),
        ] {
            if lo == 0 || lo > hi {
                return Err(GenError::Config(format!("{name} range {lo}..={hi} is invalid")));
            }
        }
        if self.max_objects == 0 {
            return Err(GenError::Config("max_objects must be positive".into()));
        }
        Ok(())
    }
}

fn polarity(yes: bool) -> &'static str {
    if yes {
        "yes"
    } else {
        "no"
    }
}

// ---------------------------------------------------------------------------
// HOPE

/// Ask about a mix of present and absent categories; present ones must be
/// answered with every instance id.
pub fn gen_hope(
    scene: &SceneGraph,
    category_pool: &BTreeSet<String>,
    cfg: &GenConfig,
    rng: &mut impl Rng,
    sample_id: String,
) -> Result<InstructionSample, GenError> {
    if scene.is_empty() {
        return Err(GenError::EmptyScene(scene.scene_id().to_string()));
    }
    let present: Vec<&str> = scene.categories().collect();
    let absent: Vec<&str> = category_pool
        .iter()
        .map(String::as_str)
        .filter(|c| !scene.has_category(c))
        .collect();

    let k = rng.gen_range(cfg.hope_queries_min..=cfg.hope_queries_max);
    let mut n_absent = randomized_round(k, cfg.hope_negative_fraction, rng);
    if k >= 2 && !absent.is_empty() {
        n_absent = n_absent.clamp(1, k - 1);
    }
    let n_present = k - n_absent;
    if present.len() < n_present || absent.len() < n_absent {
        return Err(GenError::CategoryPoolTooSmall {
            scene: scene.scene_id().to_string(),
            present: present.len(),
            absent: absent.len(),
            need_present: n_present,
            need_absent: n_absent,
        });
    }
    let mut queries: Vec<&str> = present.choose_multiple(rng, n_present).copied().collect();
    queries.extend(absent.choose_multiple(rng, n_absent).copied());
    queries.shuffle(rng);

    let segments: Vec<AnswerSegment> = queries
        .iter()
        .map(|c| {
            let ids = scene.instances_of(c);
            if ids.is_empty() {
                AnswerSegment::no()
            } else {
                AnswerSegment::yes(ids)
            }
        })
        .collect();
    let polarities: Vec<&str> = segments
        .iter()
        .map(|s| polarity(!s.ids.is_empty()))
        .collect();
    let question = format!("{HOPE_PROMPT}{}", queries.join("; "));
    Ok(InstructionSample::new(
        sample_id,
        Task::Hope,
        scene.scene_id(),
        question,
        render_segments(&segments),
    )
    .with_meta("polarity", json!(polarities))
    .with_meta("queries", json!(queries)))
}

// ---------------------------------------------------------------------------
// HROC

/// Label of the ground-truth box that best overlaps `id`'s box, when the
/// overlap reaches `threshold`. Ties favour the candidate itself.
pub fn overlap_label(scene: &SceneGraph, id: ObjectId, threshold: f64) -> Option<&str> {
    let cand = scene.object(id)?;
    let mut best: Option<(f64, bool, &str)> = None;
    for o in scene.objects() {
        let v = iou(&cand.bbox, &o.bbox);
        let is_self = o.object_id == id;
        let better = match best {
            None => true,
            Some((bv, bself, _)) => v > bv || (v == bv && is_self && !bself),
        };
        if better {
            best = Some((v, is_self, o.category.as_str()));
        }
    }
    best.filter(|(v, _, _)| *v >= threshold && *v > 0.0)
        .map(|(_, _, c)| c)
}

/// Ids usable as HROC candidates, ascending.
pub fn hroc_candidates(scene: &SceneGraph, threshold: f64) -> Vec<(ObjectId, &str)> {
    let mut out: Vec<(ObjectId, &str)> = scene
        .objects()
        .iter()
        .filter_map(|o| overlap_label(scene, o.object_id, threshold).map(|c| (o.object_id, c)))
        .collect();
    out.sort_by_key(|(id, _)| *id);
    out
}

/// Pair ids with categories; negatives get a category that exists in the scene
/// but is not the id's own.
pub fn gen_hroc(
    scene: &SceneGraph,
    cfg: &GenConfig,
    rng: &mut impl Rng,
    sample_id: String,
) -> Result<InstructionSample, GenError> {
    let categories: Vec<&str> = scene.categories().collect();
    if categories.len() < 2 {
        return Err(GenError::TooFewCategories(scene.scene_id().to_string()));
    }
    let candidates = hroc_candidates(scene, cfg.hroc_overlap_iou);
    let m = rng.gen_range(cfg.hroc_pairs_min..=cfg.hroc_pairs_max);
    if candidates.len() < m {
        return Err(GenError::IdPoolExhausted {
            scene: scene.scene_id().to_string(),
            available: candidates.len(),
            needed: m,
        });
    }
    let mut picked: Vec<(ObjectId, &str)> = candidates.choose_multiple(rng, m).copied().collect();
    picked.shuffle(rng);
    let mut n_neg = randomized_round(m, cfg.hroc_negative_fraction, rng);
    if m >= 2 {
        n_neg = n_neg.clamp(1, m - 1);
    }
    let mut negative = vec![false; m];
    negative[..n_neg].iter_mut().for_each(|n| *n = true);
    negative.shuffle(rng);

    let mut pairs = Vec::with_capacity(m);
    let mut segments = Vec::with_capacity(m);
    let mut polarities = Vec::with_capacity(m);
    for ((id, truth), neg) in picked.iter().zip(&negative) {
        if *neg {
            let others: Vec<&str> = categories.iter().copied().filter(|c| c != truth).collect();
            let wrong = others.choose(rng).expect("at least two categories");
            pairs.push(format!("{} {}", id.token(), wrong));
            segments.push(AnswerSegment::no_with(format!("it is {}", with_article(truth))));
        } else {
            pairs.push(format!("{} {}", id.token(), truth));
            segments.push(AnswerSegment {
                verdict: crate::metrics::Verdict::Yes,
                correction: None,
                ids: Vec::new(),
            });
        }
        polarities.push(polarity(!neg));
    }
    Ok(InstructionSample::new(
        sample_id,
        Task::Hroc,
        scene.scene_id(),
        format!("{HROC_PROMPT}{}", pairs.join("; ")),
        render_segments(&segments),
    )
    .with_meta("polarity", json!(polarities)))
}

// ---------------------------------------------------------------------------
// PF-3DVG

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PfBranch {
    Unfactual,
    PartialFactual,
    Factual,
}

impl PfBranch {
    pub const ALL: [PfBranch; 3] = [PfBranch::Unfactual, PfBranch::PartialFactual, PfBranch::Factual];

    pub fn as_str(self) -> &'static str {
        match self {
            PfBranch::Unfactual => "unfactual",
            PfBranch::PartialFactual => "partial_factual",
            PfBranch::Factual => "factual",
        }
    }

    fn weight(self, cfg: &GenConfig) -> f64 {
        match self {
            PfBranch::Unfactual => cfg.pf_unfactual_weight,
            PfBranch::PartialFactual => cfg.pf_partial_weight,
            PfBranch::Factual => cfg.pf_factual_weight,
        }
    }
}

/// References usable for `branch` on `scene`.
pub fn pf_candidates<'a>(
    scene: &SceneGraph,
    refs: &'a [Sr3dReference],
    lexicon: &RelationLexicon,
    branch: PfBranch,
) -> Vec<&'a Sr3dReference> {
    refs.iter()
        .filter(|r| match branch {
            PfBranch::Unfactual => !scene.has_category(&r.target_category),
            PfBranch::PartialFactual => {
                r.scene_id == scene.scene_id()
                    && scene.has_distractors(r.target_id) == Ok(false)
                    && !lexicon.swap_candidates(&r.relation).is_empty()
            }
            PfBranch::Factual => {
                r.scene_id == scene.scene_id()
                    && scene.contains(r.target_id)
                    && synonym_choices(lexicon, r).is_some_and(|s| !s.is_empty())
            }
        })
        .collect()
}

fn synonym_choices<'l>(lexicon: &'l RelationLexicon, r: &Sr3dReference) -> Option<Vec<&'l str>> {
    let entry = lexicon.get(&r.relation)?;
    let used = lexicon.find_form(&r.relation, &r.surface_text)?;
    Some(
        entry
            .synonyms
            .iter()
            .map(String::as_str)
            .filter(|s| *s != used.form)
            .collect(),
    )
}

fn pick_branch(cfg: &GenConfig, rng: &mut impl Rng) -> PfBranch {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for b in PfBranch::ALL {
        acc += b.weight(cfg);
        if u < acc {
            return b;
        }
    }
    PfBranch::ALL
        .into_iter()
        .rev()
        .find(|b| b.weight(cfg) > 0.0)
        .unwrap_or(PfBranch::Factual)
}

/// Grounding under unfactual, relation-swapped or synonym-augmented
/// references.
pub fn gen_pf3dvg(
    scene: &SceneGraph,
    refs: &[Sr3dReference],
    lexicon: &RelationLexicon,
    cfg: &GenConfig,
    rng: &mut impl Rng,
    sample_id: String,
) -> Result<InstructionSample, GenError> {
    let branch = pick_branch(cfg, rng);
    let pool = pf_candidates(scene, refs, lexicon, branch);
    let Some(r) = pool.choose(rng).copied() else {
        return Err(GenError::NoEligibleReference {
            scene: scene.scene_id().to_string(),
            branch: branch.as_str(),
        });
    };
    let source = json!({"scene_id": r.scene_id, "target_id": r.target_id, "relation": r.relation});
    let sample = match branch {
        PfBranch::Unfactual => InstructionSample::new(
            sample_id,
            Task::Pf3dvg,
            scene.scene_id(),
            grounding_question(&r.surface_text),
            render_segments(&[AnswerSegment::no()]),
        ),
        PfBranch::PartialFactual => {
            let used = lexicon
                .find_form(&r.relation, &r.surface_text)
                .expect("validated on load");
            let swaps = lexicon.swap_candidates(&r.relation);
            let new_relation = *swaps.choose(rng).expect("checked non-empty");
            let new_form = *lexicon
                .forms(new_relation)
                .choose(rng)
                .expect("relations have at least one form");
            let text = format!(
                "{}{}{}",
                &r.surface_text[..used.start],
                new_form,
                &r.surface_text[used.end..]
            );
            let answer = render_segments(&[AnswerSegment::text(
                format!("It is '{}'", used.form),
                vec![r.target_id],
            )]);
            InstructionSample::new(sample_id, Task::Pf3dvg, scene.scene_id(), grounding_question(&text), answer)
                .with_meta("swapped_relation", new_relation)
                .with_meta("swapped_form", new_form)
                .with_meta("true_form", used.form.as_str())
        }
        PfBranch::Factual => {
            let used = lexicon
                .find_form(&r.relation, &r.surface_text)
                .expect("validated on load");
            let choices = synonym_choices(lexicon, r).unwrap_or_default();
            let synonym = *choices
                .choose(rng)
                .ok_or_else(|| GenError::EmptySynonymSet(r.relation.clone()))?;
            let text = format!(
                "{}{}{}",
                &r.surface_text[..used.start],
                synonym,
                &r.surface_text[used.end..]
            );
            InstructionSample::new(
                sample_id,
                Task::Pf3dvg,
                scene.scene_id(),
                grounding_question(&text),
                render_segments(&[AnswerSegment::ids(vec![r.target_id])]),
            )
            .with_meta("synonym", synonym)
        }
    };
    Ok(sample
        .with_meta("branch", branch.as_str())
        .with_meta("source", source))
}

// ---------------------------------------------------------------------------
// 3DFQA

/// Pool scenes containing none of the record's related categories.
pub fn fqa_negative_scenes<'a>(pool: &'a [SceneGraph], record: &QaRecord) -> Vec<&'a SceneGraph> {
    pool.iter()
        .filter(|s| record.related_categories.iter().all(|c| !s.has_category(c)))
        .collect()
}

/// Faithful QA: the positive keeps the source answer and grounds the related
/// objects; the negative moves the question to a scene lacking them.
pub fn gen_3dfqa(
    pool: &[SceneGraph],
    record: &QaRecord,
    cfg: &GenConfig,
    rng: &mut impl Rng,
    sample_id: String,
) -> Result<InstructionSample, GenError> {
    let negative = rng.gen_bool(cfg.fqa_negative_fraction);
    let question = format!("{} {FQA_INSTRUCTION}", record.question.trim_end());
    let source = json!({"scene_id": record.scene_id, "question": record.question});
    let sample = if negative {
        let candidates = fqa_negative_scenes(pool, record);
        let scene = candidates
            .choose(rng)
            .ok_or_else(|| GenError::NoNegativeScene(record.related_categories.clone()))?;
        InstructionSample::new(
            sample_id,
            Task::Fqa3d,
            scene.scene_id(),
            question,
            render_segments(&[AnswerSegment::no()]),
        )
    } else {
        let own = pool
            .iter()
            .find(|s| s.scene_id() == record.scene_id)
            .ok_or_else(|| GenError::UnresolvableIds(record.scene_id.clone()))?;
        if record.related_object_ids.iter().any(|id| !own.contains(*id)) {
            return Err(GenError::UnresolvableIds(record.scene_id.clone()));
        }
        let ids: Vec<ObjectId> = record
            .related_object_ids
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        InstructionSample::new(
            sample_id,
            Task::Fqa3d,
            own.scene_id(),
            question,
            render_segments(&[AnswerSegment::text(record.answer.trim(), ids)]),
        )
    };
    Ok(sample
        .with_meta("polarity", if negative { "negative" } else { "positive" })
        .with_meta("related_categories", json!(record.related_categories))
        .with_meta("source", source))
}
