//! One pass/fail line per acceptance criterion.

// negated comparisons are deliberate: NaN must fail a check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Value;

use rigen::adversarial::{with_article, GenConfig, HROC_PROMPT};
use rigen::corpus::{sha256_hex, Corpus};
use rigen::dataset::stats::{compute_stats, sentence_length};
use rigen::dataset::{read_dataset, DatasetManifest};
use rigen::diverse::pipeline::{rephrase_samples, RephraseConfig};
use rigen::diverse::prompts::{route, PromptLibrary};
use rigen::diverse::rephrase::{draw_temperature, TEMPERATURES};
use rigen::diverse::MockBackend;
use rigen::engine::generate;
use rigen::metrics::answer::{parse_answer, Verdict};
use rigen::metrics::report::{evaluate, EvalOptions, Prediction};
use rigen::metrics::{grounding_f1, GroundingItem, Matching, SceneIndex};
use rigen::rap::{gelu_fd_check, property_report, FeatureBatch, Rap, RapDims};
use rigen::rng::stream;
use rigen::sample::{object_tokens_in, InstructionSample, Task, TaskGroup};
use rigen::scene::{iou, Aabb3, ObjectId};
use rigen::sequence::{assemble, from_sample, FeatureOrder, IdVocabulary, SegmentKind, Token, VisionSlot};
use rigen::synth::{synthesize, SynthSpec};

const PER_TASK: usize = 10_000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| synthesize(&SynthSpec::default()).into_corpus().expect("synthetic corpus resolves"))
}

fn adversarial_config(seed: u64) -> GenConfig {
    let mut cfg = GenConfig {
        seed,
        ..GenConfig::default()
    };
    for t in TaskGroup::Adversarial.tasks() {
        cfg.quotas.insert(t, PER_TASK);
    }
    cfg
}

/// 10k samples of each adversarial task, generated once.
fn adversarial() -> &'static (Vec<InstructionSample>, f64) {
    static S: OnceLock<(Vec<InstructionSample>, f64)> = OnceLock::new();
    S.get_or_init(|| {
        let c = corpus();
        let t = Instant::now();
        let g = generate(c, &adversarial_config(11)).expect("generation succeeds");
        (g.samples, t.elapsed().as_secs_f64())
    })
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rigen"));
    c.env_remove("SOURCE_DATE_EPOCH");
    c
}

fn run_ok(cmd: &mut Command) -> Result<(), String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "{:?} exited with {:?}: {}",
        cmd,
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn write_synth(dir: &Path) -> Result<(), String> {
    run_ok(bin().args(["synth", "--out"]).arg(dir))
}

fn generate_cmd(corpus: &Path, out: &Path) -> Command {
    let mut c = bin();
    c.arg("generate")
        .arg("--scenes")
        .arg(corpus.join("scenes"))
        .arg("--sr3d")
        .arg(corpus.join("sr3d.jsonl"))
        .arg("--qa")
        .arg(corpus.join("qa.jsonl"))
        .arg("--captions")
        .arg(corpus.join("captions.jsonl"))
        .args(["--preset", "paper-mix", "--scale", "0.001", "--seed", "5", "--out"])
        .arg(out);
    c
}

fn c1_polarity_soundness() -> Outcome {
    let c = corpus();
    let categories: BTreeSet<&str> = c.scenes.iter().flat_map(|s| s.categories()).collect();
    ensure!(c.scenes.len() >= 50, "only {} scenes", c.scenes.len());
    ensure!(categories.len() >= 15, "only {} categories", categories.len());
    let (samples, secs) = adversarial();
    let mut counts: BTreeMap<Task, usize> = BTreeMap::new();
    for s in samples {
        *counts.entry(s.task).or_default() += 1;
        let scene = c.scene(&s.scene_id).ok_or(format!("{}: unknown scene", s.sample_id))?;
        let segs = parse_answer(&s.answer).segments;
        match s.task {
            Task::Hope => {
                let queries: Vec<String> = serde_json::from_value(s.meta["queries"].clone()).unwrap();
                ensure!(segs.len() == queries.len(), "{}: segment count", s.sample_id);
                for (q, seg) in queries.iter().zip(&segs) {
                    let truth = scene.instances_of(q);
                    if truth.is_empty() {
                        ensure!(seg.verdict == Verdict::No && seg.ids.is_empty(), "{}: '{q}' absent", s.sample_id);
                    } else {
                        let mut got = seg.ids.clone();
                        got.sort();
                        ensure!(seg.verdict == Verdict::Yes && got == truth, "{}: '{q}' instances", s.sample_id);
                    }
                }
            }
            Task::Hroc => {
                let body = s.question.strip_prefix(HROC_PROMPT).ok_or("hroc prompt")?;
                let pairs: Vec<&str> = body.split("; ").collect();
                ensure!(pairs.len() == segs.len(), "{}: pair count", s.sample_id);
                for (p, seg) in pairs.iter().zip(&segs) {
                    let (tok, cat) = p.split_once(' ').ok_or("pair shape")?;
                    let id = object_tokens_in(tok)[0];
                    let truth = &scene.object(id).ok_or("hroc id in scene")?.category;
                    match seg.verdict {
                        Verdict::Yes => ensure!(cat == truth, "{}: yes on wrong pair", s.sample_id),
                        Verdict::No => {
                            ensure!(cat != truth, "{}: negative equals truth", s.sample_id);
                            ensure!(scene.has_category(cat), "{}: '{cat}' not in scene", s.sample_id);
                            let want = format!("it is {}", with_article(truth));
                            ensure!(seg.correction.as_deref() == Some(want.as_str()), "{}: correction", s.sample_id);
                        }
                        Verdict::None => return Err(format!("{}: pair without verdict", s.sample_id)),
                    }
                }
            }
            Task::Pf3dvg => {
                let target = s.meta["source"]["target_id"].as_u64().ok_or("pf source")? as u32;
                match s.meta["branch"].as_str().ok_or("pf branch")? {
                    "unfactual" => ensure!(s.answer == "No", "{}: unfactual answer", s.sample_id),
                    "partial_factual" => {
                        ensure!(s.answer_object_ids == vec![ObjectId(target)], "{}: target", s.sample_id);
                        ensure!(!scene.has_distractors(ObjectId(target)).unwrap(), "{}: distractor", s.sample_id);
                    }
                    "factual" => ensure!(s.answer_object_ids == vec![ObjectId(target)], "{}: target", s.sample_id),
                    other => return Err(format!("unknown branch {other}")),
                }
            }
            Task::Fqa3d => {
                let related: Vec<String> = serde_json::from_value(s.meta["related_categories"].clone()).unwrap();
                if s.meta["polarity"] == "negative" {
                    ensure!(related.iter().all(|r| !scene.has_category(r)), "{}: related present", s.sample_id);
                    ensure!(s.answer_object_ids.is_empty(), "{}: ids on refusal", s.sample_id);
                } else {
                    ensure!(s.answer_object_ids.iter().all(|i| scene.contains(*i)), "{}: evidence", s.sample_id);
                }
            }
            _ => return Err(format!("unexpected task {}", s.task)),
        }
    }
    ensure!(counts.values().all(|n| *n == PER_TASK), "counts {counts:?}");
    ensure!(*secs < 60.0, "generation took {secs:.1}s");
    Ok(format!(
        "{} samples over {} scenes / {} categories, 0 violations, {secs:.2}s",
        samples.len(),
        c.scenes.len(),
        categories.len()
    ))
}

fn c2_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus");
    write_synth(&corpus)?;
    let mut digests = Vec::new();
    for run in ["a.jsonl", "b.jsonl"] {
        let out = dir.path().join(run);
        run_ok(generate_cmd(&corpus, &out).arg("--rephrase"))?;
        let data = std::fs::read(&out).map_err(|e| e.to_string())?;
        let manifest = std::fs::read(dir.path().join(format!("{run}.manifest.json"))).map_err(|e| e.to_string())?;
        digests.push((sha256_hex(&data), sha256_hex(&manifest)));
    }
    ensure!(digests[0] == digests[1], "digests differ: {digests:?}");
    Ok(format!("dataset {} manifest {}", &digests[0].0[..12], &digests[0].1[..12]))
}

fn c3_composition() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus");
    write_synth(&corpus)?;
    let out = dir.path().join("mix.jsonl");
    run_ok(&mut generate_cmd(&corpus, &out))?;
    run_ok(bin().args(["validate", "--in"]).arg(&out).arg("--scenes").arg(corpus.join("scenes")))?;
    let m = DatasetManifest::read(&dir.path().join("mix.jsonl.manifest.json")).map_err(|e| e.to_string())?;
    let g = |x: TaskGroup| m.group_counts.get(&x).copied().unwrap_or(0);
    let got = (g(TaskGroup::Adversarial), g(TaskGroup::Diverse), g(TaskGroup::Benchmark));
    ensure!(got == (344, 508, 165), "group counts {got:?}");
    ensure!(m.total == 1017, "total {}", m.total);
    Ok(format!("{} / {} / {} (manifest validated)", got.0, got.1, got.2))
}

fn negative_share(samples: &[InstructionSample], task: Task) -> f64 {
    let (mut neg, mut all) = (0usize, 0usize);
    for s in samples.iter().filter(|s| s.task == task) {
        for p in s.meta["polarity"].as_array().unwrap() {
            all += 1;
            neg += usize::from(p == "no");
        }
    }
    neg as f64 / all as f64
}

fn c4_mix_realization() -> Outcome {
    let mut details = Vec::new();
    for target in [0.5, 0.4] {
        let mut cfg = GenConfig {
            seed: 23,
            hope_negative_fraction: target,
            hroc_negative_fraction: target,
            ..GenConfig::default()
        };
        cfg.quotas.insert(Task::Hope, PER_TASK);
        cfg.quotas.insert(Task::Hroc, PER_TASK);
        let samples = generate(corpus(), &cfg).map_err(|e| e.to_string())?.samples;
        for task in [Task::Hope, Task::Hroc] {
            let share = negative_share(&samples, task);
            ensure!((share - target).abs() <= 0.02, "{task} at {target}: realized {share:.4}");
            details.push(format!("{task}@{target}={share:.4}"));
        }
    }
    Ok(details.join(" "))
}

fn c5_rephrase() -> Outcome {
    let c = corpus();
    let mut cfg = GenConfig {
        seed: 3,
        ..GenConfig::default()
    };
    for t in Task::ALL {
        cfg.quotas.insert(t, 150);
    }
    let samples = generate(c, &cfg).map_err(|e| e.to_string())?.samples;
    let rcfg = RephraseConfig {
        seed: 3,
        ..RephraseConfig::default()
    };
    let (out, report) = rephrase_samples(&samples, &PromptLibrary::builtin(), &MockBackend::new(3), &rcfg);
    ensure!(report.requested > 0, "nothing routed");
    ensure!(
        report.rephrased == report.requested && report.fallbacks == 0,
        "extracted {}/{}",
        report.rephrased,
        report.requested
    );
    let by_id: BTreeMap<&str, &InstructionSample> = samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    for s in &out {
        let original = by_id
            .get(s.sample_id.trim_end_matches("-rephrased"))
            .ok_or(format!("{}: no source", s.sample_id))?;
        for (a, b) in [(&original.question, &s.question), (&original.answer, &s.answer)] {
            let mut x = object_tokens_in(a);
            let mut y = object_tokens_in(b);
            x.sort();
            y.sort();
            ensure!(x == y, "{}: id multiset changed", s.sample_id);
        }
        let is_copy = s.sample_id != original.sample_id;
        if route(s.task).is_some() && (is_copy || s.task.group() != TaskGroup::Benchmark) {
            ensure!(s.meta.get("rephrased") == Some(&Value::Bool(true)), "{}: not rephrased", s.sample_id);
        }
    }
    let n = 9_999;
    let mut counts = [0usize; 3];
    for i in 0..n {
        let t = draw_temperature(17, &format!("sample-{i}"));
        let k = TEMPERATURES.iter().position(|x| *x == t).ok_or(format!("temperature {t}"))?;
        counts[k] += 1;
    }
    for k in counts {
        let p = k as f64 / n as f64;
        ensure!((p - 1.0 / 3.0).abs() <= 0.02, "temperature counts {counts:?}");
    }
    Ok(format!(
        "{}/{} extracted, ids preserved on {} samples, temperatures {counts:?}",
        report.rephrased,
        report.requested,
        out.len()
    ))
}

fn c6_rap() -> Outcome {
    let dims = RapDims::default();
    let rap = Rap::seeded(dims, 2, 8).map_err(|e| e.to_string())?;
    let batch = FeatureBatch::random(150, dims, 8);
    let r = property_report(&rap, &batch, 8).map_err(|e| e.to_string())?;
    ensure!(r.max_norm_deviation <= 1e-9, "norm deviation {}", r.max_norm_deviation);
    ensure!(r.permutation_max_abs < 1e-12, "permutation {}", r.permutation_max_abs);
    ensure!(r.scale_invariance_max_abs < 1e-9, "scale {}", r.scale_invariance_max_abs);
    ensure!(r.chunked_bitwise_equal, "chunked forward differs");
    let fd = gelu_fd_check(1000, 1e-5, 8);
    ensure!(fd <= 1e-6, "gelu derivative {fd}");
    Ok(format!(
        "norm {:.1e}, perm {:.1e}, scale {:.1e}, gelu fd {fd:.1e}",
        r.max_norm_deviation, r.permutation_max_abs, r.scale_invariance_max_abs
    ))
}

/// Voxel centres of a `res`-cell grid on `[g0, g1]` that fall inside `[lo, hi]`.
fn cells(g0: f64, g1: f64, lo: f64, hi: f64, res: usize) -> Vec<bool> {
    (0..res)
        .map(|i| {
            let c = g0 + (g1 - g0) * (i as f64 + 0.5) / res as f64;
            c >= lo && c <= hi
        })
        .collect()
}

/// Voxel-count IoU on a `res`³ grid over the unit cube, or over the pair's
/// bounding box when `fit`. Membership is separable per axis, so counts are
/// products of per-axis counts.
fn voxel_iou(a: &Aabb3, b: &Aabb3, res: usize, fit: bool) -> f64 {
    let (mut na, mut nb, mut ni) = (1usize, 1usize, 1usize);
    for ax in 0..3 {
        let (g0, g1) = if fit {
            (a.min[ax].min(b.min[ax]), a.max[ax].max(b.max[ax]))
        } else {
            (0.0, 1.0)
        };
        let ca = cells(g0, g1, a.min[ax], a.max[ax], res);
        let cb = cells(g0, g1, b.min[ax], b.max[ax], res);
        na *= ca.iter().filter(|x| **x).count();
        nb *= cb.iter().filter(|x| **x).count();
        ni *= ca.iter().zip(&cb).filter(|(x, y)| **x && **y).count();
    }
    let union = na + nb - ni;
    if union == 0 {
        0.0
    } else {
        ni as f64 / union as f64
    }
}

/// Cell-by-cell count on the unit cube, used to confirm the separable count.
fn voxel_iou_brute(a: &Aabb3, b: &Aabb3, res: usize) -> f64 {
    let inside = |bx: &Aabb3, p: [f64; 3]| (0..3).all(|k| p[k] >= bx.min[k] && p[k] <= bx.max[k]);
    let (g0, g1) = ([0.0f64; 3], [1.0f64; 3]);
    let (mut ni, mut nu) = (0usize, 0usize);
    for i in 0..res {
        for j in 0..res {
            for k in 0..res {
                let v = [i, j, k];
                let p: [f64; 3] = std::array::from_fn(|d| g0[d] + (g1[d] - g0[d]) * (v[d] as f64 + 0.5) / res as f64);
                let (x, y) = (inside(a, p), inside(b, p));
                ni += usize::from(x && y);
                nu += usize::from(x || y);
            }
        }
    }
    if nu == 0 {
        0.0
    } else {
        ni as f64 / nu as f64
    }
}

fn random_box(rng: &mut impl Rng) -> Aabb3 {
    let mut min = [0.0; 3];
    let mut max = [0.0; 3];
    for k in 0..3 {
        let size = rng.gen_range(0.2..0.8);
        min[k] = rng.gen_range(0.0..1.0 - size);
        max[k] = min[k] + size;
    }
    Aabb3::new(min, max).unwrap()
}

/// Box whose faces lie on the `res` lattice of `[0, 1]`, so voxel counts are exact.
fn lattice_box(rng: &mut impl Rng, res: usize) -> Aabb3 {
    let mut min = [0.0; 3];
    let mut max = [0.0; 3];
    for k in 0..3 {
        let lo = rng.gen_range(0..res - 1);
        let hi = rng.gen_range(lo + 1..=res);
        min[k] = lo as f64 / res as f64;
        max[k] = hi as f64 / res as f64;
    }
    Aabb3::new(min, max).unwrap()
}

fn c7_geometry() -> Outcome {
    let res = 200;
    let mut rng = stream(0, "acceptance", "iou", 0);
    // faces on the lattice: the voxel count is exact, so any gap is a formula error
    let mut worst: f64 = 0.0;
    for n in 0..1000 {
        let a = lattice_box(&mut rng, res);
        let b = lattice_box(&mut rng, res);
        let oracle = voxel_iou(&a, &b, res, false);
        if n < 2 {
            let brute = voxel_iou_brute(&a, &b, res);
            ensure!((brute - oracle).abs() < 1e-15, "separable count {oracle} vs brute {brute}");
        }
        worst = worst.max((iou(&a, &b) - oracle).abs());
    }
    ensure!(worst <= 2e-3, "max deviation from voxel oracle {worst}");
    // arbitrary faces: bounded by grid resolution on thin overlaps
    let mut loose: f64 = 0.0;
    for _ in 0..1000 {
        let a = random_box(&mut rng);
        let b = random_box(&mut rng);
        loose = loose.max((iou(&a, &b) - voxel_iou(&a, &b, res, true)).abs());
    }
    ensure!(loose <= 1e-2, "max deviation on unaligned boxes {loose}");
    let bx = |min: [f64; 3], max: [f64; 3]| Aabb3::new(min, max).unwrap();
    let unit = bx([0.0; 3], [1.0; 3]);
    let cases = [
        (bx([0.0; 3], [2.0, 1.0, 1.0]), bx([1.0, 0.0, 0.0], [3.0, 1.0, 1.0]), 1.0 / 3.0),
        (unit, unit, 1.0),
        (unit, bx([2.0; 3], [3.0; 3]), 0.0),
        (unit, bx([1.0, 0.0, 0.0], [2.0, 1.0, 1.0]), 0.0),
        (unit, bx([0.0; 3], [2.0; 3]), 1.0 / 8.0),
        (unit, bx([0.5, 0.0, 0.0], [1.5, 1.0, 1.0]), 1.0 / 3.0),
    ];
    for (a, b, want) in cases {
        let got = iou(&a, &b);
        ensure!((got - want).abs() <= 1e-12, "iou {got} expected {want}");
    }
    Ok(format!(
        "max |iou - voxel| = {worst:.1e} over 1000 lattice pairs ({loose:.1e} unaligned), {} analytic cases exact",
        cases.len()
    ))
}

fn c8_metrics() -> Outcome {
    let c = corpus();
    let (adv, _) = adversarial();
    let mut cfg = GenConfig {
        seed: 9,
        ..GenConfig::default()
    };
    for t in Task::ALL.into_iter().filter(|t| t.group() != TaskGroup::Adversarial) {
        cfg.quotas.insert(t, 150);
    }
    let other = generate(c, &cfg).map_err(|e| e.to_string())?.samples;
    let all: Vec<&InstructionSample> = adv.iter().chain(&other).collect();
    for s in &all {
        let back = parse_answer(&s.answer).render();
        ensure!(back == s.answer, "{}: '{}' renders as '{back}'", s.sample_id, s.answer);
    }

    let index = SceneIndex::new(c.scenes.iter());
    let pool: Vec<&InstructionSample> = all.iter().copied().filter(|s| s.task.group() != TaskGroup::Adversarial).collect();
    let opts = EvalOptions::default();
    let mut rng = stream(0, "acceptance", "eval", 0);
    let mut em_pairs = 0;
    for _ in 0..100 {
        let set: Vec<InstructionSample> = pool.choose_multiple(&mut rng, 60).map(|s| (*s).clone()).collect();
        let preds: Vec<Prediction> = set
            .iter()
            .map(|s| {
                let scene = c.scene(&s.scene_id).unwrap();
                let answer_text = match rng.gen_range(0..4) {
                    0 => s.answer.clone(),
                    1 => format!("I think {}", s.answer),
                    2 => pool.choose(&mut rng).unwrap().answer.clone(),
                    _ => {
                        let k = rng.gen_range(0..3);
                        let ids: Vec<String> =
                            scene.objects().choose_multiple(&mut rng, k).map(|o| o.object_id.token()).collect();
                        ids.join(" ")
                    }
                };
                Prediction {
                    sample_id: s.sample_id.clone(),
                    answer_text,
                }
            })
            .collect();
        let r = evaluate(&set, &preds, &index, &opts);
        {
            let (lo, hi) = ("0.25", "0.5");
            ensure!(r.acc_at[lo] >= r.acc_at[hi], "Acc increased with threshold");
            ensure!(r.f1_at[lo] >= r.f1_at[hi], "F1 increased with threshold");
        }
        for row in &r.rows {
            if row.em == Some(true) {
                ensure!(row.em_r == Some(true), "{}: EM without EM-R", row.sample_id);
            }
            em_pairs += usize::from(row.em.is_some());
        }
    }
    let empty = GroundingItem {
        sample_id: "z".into(),
        scene_id: c.scenes[0].scene_id().to_string(),
        predicted: vec![],
        ground_truth: vec![],
    };
    let f1 = grounding_f1(&[empty], &index, 0.25, Matching::Greedy).value;
    ensure!(f1 == 1.0, "empty-vs-empty F1 {f1}");
    Ok(format!(
        "round-trip on {} answers, 100 eval sets monotone, EM=>EM-R on {em_pairs} rows, empty F1 = 1",
        all.len()
    ))
}

fn c9_sequences() -> Outcome {
    let c = corpus();
    let (adv, _) = adversarial();
    let vocab = IdVocabulary::new(150).map_err(|e| e.to_string())?;
    let mut rng = stream(0, "acceptance", "sequence", 0);
    let mut checked = 0;
    for s in adv.choose_multiple(&mut rng, 300) {
        let scene = c.scene(&s.scene_id).unwrap();
        for order in [FeatureOrder::ThreeDFirst, FeatureOrder::TwoDFirst] {
            let seq = from_sample(s, scene, "You are a helpful assistant.", &vocab, order).map_err(|e| e.to_string())?;
            let kinds: Vec<SegmentKind> = seq.segments().iter().map(|(k, _)| *k).collect();
            ensure!(kinds == SegmentKind::ORDER, "segment order {kinds:?}");
            let vision = seq.segment(SegmentKind::Vision);
            ensure!(vision.len() == 4 * scene.len(), "vision length {}", vision.len());
            for w in vision.chunks(4) {
                let (Token::Obj(a), Token::Obj(b)) = (&w[0], &w[3]) else {
                    return Err("wrapper is not an id token".into());
                };
                ensure!(a == b, "wrapper ids differ");
                let ok = match order {
                    FeatureOrder::ThreeDFirst => matches!((&w[1], &w[2]), (Token::Feat3d(_), Token::Feat2d(_))),
                    FeatureOrder::TwoDFirst => matches!((&w[1], &w[2]), (Token::Feat2d(_), Token::Feat3d(_))),
                };
                ensure!(ok, "feature order inside wrapper");
            }
            let ids = seq.vision_object_ids();
            ensure!(ids.windows(2).all(|w| w[0] < w[1]), "slots not ascending");

            let mut slots: Vec<VisionSlot> =
                scene.objects().iter().map(|o| VisionSlot::for_object(o.object_id)).collect();
            let reference = assemble(vec![], vec![], &slots, vec![], &vocab, order).unwrap();
            slots.shuffle(&mut rng);
            let shuffled = assemble(vec![], vec![], &slots, vec![], &vocab, order).unwrap();
            ensure!(reference == shuffled, "slot order depends on input order");
            checked += 1;
        }
    }
    Ok(format!("{checked} sequences checked"))
}

fn c10_stats() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let samples = read_dataset(&dir.join("stats_golden.jsonl")).map_err(|e| e.to_string())?;
    let expected: BTreeMap<String, usize> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("stats_golden.lengths.json")).unwrap()).unwrap();
    ensure!(samples.len() == 20 && expected.len() == 20, "golden file size");
    for s in &samples {
        let got = sentence_length(s);
        ensure!(got == expected[&s.sample_id], "{}: length {got}, expected {}", s.sample_id, expected[&s.sample_id]);
    }
    let report = compute_stats(&samples, 1000, None);
    let total: usize = report.length_by_task.values().map(|l| l.total_words).sum();
    ensure!(total == expected.values().sum::<usize>(), "total words {total}");
    for words in report.word_frequency.values() {
        let id_like = |w: &str| w.contains('<') || w.strip_prefix("obj").is_some_and(|r| r.chars().all(|c| c.is_ascii_digit()));
        ensure!(words.iter().all(|(w, _)| !id_like(w)), "id token in frequency table");
    }
    let adv_stats = report.length_by_task.get(&Task::Hope).ok_or("hope stats")?;
    ensure!(adv_stats.total_words == 37 && adv_stats.min == 5 && adv_stats.max == 27, "hope stats {adv_stats:?}");
    Ok(format!("20 golden lengths exact, {total} words, no id tokens in frequencies"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("polarity soundness", c1_polarity_soundness),
        ("determinism", c2_determinism),
        ("composition", c3_composition),
        ("mix realization", c4_mix_realization),
        ("rephrase pipeline", c5_rephrase),
        ("projector reference", c6_rap),
        ("geometry oracle", c7_geometry),
        ("metric properties", c8_metrics),
        ("sequence organization", c9_sequences),
        ("stats", c10_stats),
    ];
    // written to the process stdout directly so the lines survive test capture
    let mut out = std::io::stdout();
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => {
                let _ = writeln!(out, "criterion {:>2} PASS {name}: {detail}", i + 1);
            }
            Err(why) => {
                let _ = writeln!(out, "criterion {:>2} FAIL {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
