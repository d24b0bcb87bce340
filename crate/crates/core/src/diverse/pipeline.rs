//! Batch rephrasing of generated samples.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::prompts::{route, PromptLibrary, RephraseTarget};
use super::rephrase::{
    draw_temperature, rephrase, ChatBackend, IdCheck, RephraseError, RephraseRequest, RephraseResult,
};
use crate::sample::{object_ids_in, InstructionSample, TaskGroup};

/// What happens to benchmark-styled samples: keep the original and add a
/// rephrased copy, or rewrite in place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkMode {
    Duplicate,
    InPlace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RephraseConfig {
    pub seed: u64,
    pub attempt_budget: u32,
    pub max_in_flight: usize,
    pub benchmark_mode: BenchmarkMode,
    /// Stop sending after this many transport failures in a row; remaining
    /// requests fall back unsent. Zero disables the cutoff.
    pub abort_after: usize,
}

impl Default for RephraseConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            attempt_budget: 3,
            max_in_flight: 4,
            benchmark_mode: BenchmarkMode::Duplicate,
            abort_after: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RephraseReport {
    pub passthrough: usize,
    pub requested: usize,
    pub rephrased: usize,
    pub fallbacks: usize,
    pub transport_failures: usize,
    pub aborted: bool,
    pub failures: Vec<String>,
}

struct Job {
    input: usize,
    request: Result<RephraseRequest, RephraseError>,
    target: RephraseTarget,
    check: IdCheck,
    copy: bool,
}

fn source_text(sample: &InstructionSample, target: RephraseTarget) -> String {
    match target {
        RephraseTarget::Question => sample.question.clone(),
        RephraseTarget::Answer => sample.answer.clone(),
        RephraseTarget::QuestionBeforeSuffix(sfx) => sample
            .question
            .strip_suffix(sfx)
            .unwrap_or(&sample.question)
            .trim_end()
            .to_string(),
    }
}

fn apply(sample: &InstructionSample, target: RephraseTarget, text: &str) -> InstructionSample {
    let mut out = sample.clone();
    match target {
        RephraseTarget::Question => out.question = text.to_string(),
        RephraseTarget::Answer => out.answer = text.to_string(),
        RephraseTarget::QuestionBeforeSuffix(sfx) => {
            let suffixed = sample.question.ends_with(sfx);
            out.question = if suffixed {
                format!("{text} {sfx}")
            } else {
                text.to_string()
            };
        }
    }
    out.question_object_ids = object_ids_in(&out.question);
    out.answer_object_ids = object_ids_in(&out.answer);
    out
}

/// Rephrase every routed sample. Output order follows input order; failures
/// keep the original text and are flagged in `meta`.
pub fn rephrase_samples(
    samples: &[InstructionSample],
    prompts: &PromptLibrary,
    backend: &dyn ChatBackend,
    cfg: &RephraseConfig,
) -> (Vec<InstructionSample>, RephraseReport) {
    let mut report = RephraseReport::default();
    let mut jobs = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let Some((prompt, target)) = route(s.task) else {
            report.passthrough += 1;
            continue;
        };
        let set = prompts.get(prompt);
        let temperature = draw_temperature(cfg.seed, &s.sample_id);
        let check = match target {
            RephraseTarget::Answer => IdCheck::Sequence,
            _ => IdCheck::Multiset,
        };
        jobs.push(Job {
            input: i,
            request: RephraseRequest::new(
                set.system.clone(),
                set.one_shot.clone(),
                &source_text(s, target),
                temperature,
                prompt.as_str(),
            ),
            target,
            check,
            copy: s.task.group() == TaskGroup::Benchmark && cfg.benchmark_mode == BenchmarkMode::Duplicate,
        });
    }
    report.requested = jobs.len();

    let results: Vec<Mutex<Option<Result<RephraseResult, RephraseError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let streak = AtomicUsize::new(0);
    let aborted = AtomicBool::new(false);
    let workers = cfg.max_in_flight.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(k) else { break };
                let r = match &job.request {
                    Ok(_) if aborted.load(Ordering::Relaxed) => Err(RephraseError::Aborted),
                    Ok(req) => rephrase(req, backend, cfg.attempt_budget, job.check),
                    Err(e) => Err(e.clone()),
                };
                match &r {
                    Err(RephraseError::Transport { .. }) => {
                        let n = streak.fetch_add(1, Ordering::Relaxed) + 1;
                        if cfg.abort_after > 0 && n >= cfg.abort_after {
                            aborted.store(true, Ordering::Relaxed);
                        }
                    }
                    Ok(_) => streak.store(0, Ordering::Relaxed),
                    Err(_) => {}
                }
                *results[k].lock().expect("not poisoned") = Some(r);
            });
        }
    });

    let backend_name = backend.name();
    let mut out: Vec<InstructionSample> = Vec::with_capacity(samples.len() + jobs.len());
    let mut job_iter = jobs.iter().zip(results).peekable();
    for (i, s) in samples.iter().enumerate() {
        let Some((job, _)) = job_iter.peek() else {
            out.push(s.clone());
            continue;
        };
        if job.input != i {
            out.push(s.clone());
            continue;
        }
        let (job, cell) = job_iter.next().expect("peeked");
        let result = cell.into_inner().expect("not poisoned").expect("every job ran");
        let temperature = job.request.as_ref().map(|r| r.temperature).unwrap_or(f64::NAN);
        let mut rewritten = match &result {
            Ok(r) => {
                report.rephrased += 1;
                apply(s, job.target, &r.rephrased)
                    .with_meta("rephrased", true)
                    .with_meta("rephrase_attempts", r.attempts)
                    .with_meta("rephrase_original", r.original.as_str())
            }
            Err(e) => {
                report.fallbacks += 1;
                if e.is_transport() {
                    report.transport_failures += 1;
                }
                report.failures.push(format!("{}: {e}", s.sample_id));
                s.clone()
                    .with_meta("rephrased", false)
                    .with_meta("rephrase_fallback", true)
                    .with_meta("rephrase_attempts", e.attempts())
                    .with_meta("rephrase_error", e.to_string())
            }
        };
        rewritten = rewritten
            .with_meta("temperature", json!(temperature))
            .with_meta("backend", backend_name.as_str());
        if job.copy {
            out.push(s.clone());
            rewritten.sample_id = format!("{}-rephrased", s.sample_id);
        }
        out.push(rewritten);
    }
    report.aborted = aborted.into_inner();
    (out, report)
}
