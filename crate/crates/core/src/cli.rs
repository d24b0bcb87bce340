//! Command-line interface.
//!
//! Exit codes: 0 success, 1 validation failures, 2 usage or configuration
//! error, 3 backend or transport failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{BackendKind, RunConfig};
use crate::corpus::{load_corpus, load_scene_dir, CorpusPaths};
use crate::dataset::compose::{check_plan, Preset};
use crate::dataset::stats::compute_stats;
use crate::dataset::validate::validate;
use crate::dataset::{config_hash, manifest_path, read_dataset, write_with_manifest, DatasetManifest, ManifestInputs};
use crate::diverse::http::HttpBackend;
use crate::diverse::pipeline::{rephrase_samples, BenchmarkMode, RephraseReport};
use crate::diverse::prompts::PromptLibrary;
use crate::diverse::rephrase::{ChatBackend, MockBackend};
use crate::engine::{capacities, generate};
use crate::metrics::report::{evaluate, EvalOptions, Prediction};
use crate::metrics::{Matching, SceneIndex};
use crate::rap::{property_report, FeatureBatch, Rap, RapDims};
use crate::sample::{InstructionSample, Task};
use crate::scene::DEFAULT_MAX_OBJECTS;
use crate::synth::{synthesize, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

/// Error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_USAGE,
            error: error.into(),
        }
    }

    fn validation(msg: String) -> Self {
        Self {
            code: EXIT_VALIDATION,
            error: anyhow!(msg),
        }
    }

    fn backend(msg: String) -> Self {
        Self {
            code: EXIT_BACKEND,
            error: anyhow!(msg),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self::usage(error)
    }
}

type CliResult = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "rigen", version, about = "Robust instruction data for 3D scene-language models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset and its manifest from corpora.
    Generate(GenerateArgs),
    /// Rephrase an existing dataset.
    Rephrase(RephraseArgs),
    /// Check a dataset for consistency; exits 1 on any violation.
    Validate(ValidateArgs),
    /// Sentence-length and word-frequency statistics.
    Stats(StatsArgs),
    /// Score predictions against a dataset.
    Eval(EvalArgs),
    /// Run the projector reference on a fixture and check its properties.
    RapCheck(RapCheckArgs),
    /// Write a seeded synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct CorpusArgs {
    /// Directory of scene JSON files.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    /// Templated references (JSON lines).
    #[arg(long)]
    pub sr3d: Option<PathBuf>,
    /// Question-answer records (JSON lines).
    #[arg(long)]
    pub qa: Option<PathBuf>,
    /// Caption records (JSON lines).
    #[arg(long)]
    pub captions: Option<PathBuf>,
    /// Relation lexicon JSON (built-in lexicon when omitted).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Duplicate,
    InPlace,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Output dataset path; the manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Group-level mix; `paper-mix` is the only preset.
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Multiplier on the preset's group totals.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Per-task quota, e.g. `--quota hope=100`. Repeatable.
    #[arg(long = "quota", value_parser = parse_quota)]
    pub quotas: Vec<(Task, usize)>,
    /// Largest object count a scene may have.
    #[arg(long)]
    pub max_objects: Option<usize>,
    /// Rephrase routed tasks after generation.
    #[arg(long)]
    pub rephrase: bool,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Directory with `<task>.system.txt` and `<task>.one_shot.txt` for every prompt task.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Value recorded as `generated_at` (default: SOURCE_DATE_EPOCH, else none).
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Args)]
pub struct RephraseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub attempt_budget: Option<u32>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long, value_enum)]
    pub benchmark_mode: Option<ModeArg>,
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Scene directory; enables scene and id existence checks.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_OBJECTS)]
    pub max_objects: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MatchingArg {
    Greedy,
    Optimal,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSON lines of `{"sample_id", "answer_text"}`.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_OBJECTS)]
    pub max_objects: usize,
    #[arg(long, value_enum, default_value = "greedy")]
    pub matching: MatchingArg,
    /// Make EM-R identical to EM.
    #[arg(long)]
    pub no_refined: bool,
    /// Write the full per-sample report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RapCheckArgs {
    /// JSON with `uni3d`, `mask3d` and `pos` matrices.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Rows of a random batch when no fixture is given.
    #[arg(long, default_value_t = 150)]
    pub rows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 60)]
    pub scenes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_quota(s: &str) -> Result<(Task, usize), String> {
    let (t, n) = s.split_once('=').ok_or_else(|| format!("expected TASK=N, got '{s}'"))?;
    let task: Task = t.trim().parse()?;
    let n = n.trim().parse().map_err(|_| format!("bad count in '{s}'"))?;
    Ok((task, n))
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", render_chain(&f.error));
            f.code
        }
    }
}

// causes already quoted by their parent are not repeated
fn render_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Generate(a) => cmd_generate(a),
        Command::Rephrase(a) => cmd_rephrase(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Eval(a) => cmd_eval(a),
        Command::RapCheck(a) => cmd_rap_check(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn timestamp(flag: Option<String>) -> Option<String> {
    flag.or_else(|| std::env::var("SOURCE_DATE_EPOCH").ok().filter(|v| !v.is_empty()))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).map_err(Failure::usage)?,
        None => RunConfig::default(),
    };
    cfg.rephrase.apply_env().map_err(Failure::usage)?;
    Ok(cfg)
}

fn backend_for(kind: BackendKind, cfg: &RunConfig, seed: u64) -> Box<dyn ChatBackend> {
    match kind {
        BackendKind::Mock => Box::new(MockBackend::new(seed)),
        BackendKind::Http => Box::new(HttpBackend::new(cfg.rephrase.http_config())),
    }
}

fn prompts_for(dir: Option<&Path>) -> Result<PromptLibrary, Failure> {
    match dir {
        Some(d) => PromptLibrary::from_dir(d).map_err(Failure::usage),
        None => Ok(PromptLibrary::builtin()),
    }
}

fn print_rephrase_report(r: &RephraseReport) {
    eprintln!(
        "rephrase: {} requested, {} rephrased, {} fell back ({} transport), {} passed through",
        r.requested, r.rephrased, r.fallbacks, r.transport_failures, r.passthrough
    );
    if r.aborted {
        eprintln!("rephrase: stopped sending after repeated transport failures");
    }
    for f in r.failures.iter().take(10) {
        eprintln!("  {f}");
    }
}

fn print_counts(m: &DatasetManifest) {
    for (t, n) in m.counts.iter().filter(|(_, n)| **n > 0) {
        println!("{:<26} {n:>8}", t.as_str());
    }
    for (g, n) in &m.group_counts {
        println!("{:<26} {n:>8}", format!("[{}]", g.as_str()));
    }
    println!("{:<26} {:>8}", "total", m.total);
}

#[derive(Serialize)]
struct HashedConfig<'a> {
    generation: &'a crate::adversarial::GenConfig,
    rephrase: Option<&'a crate::config::RephraseSection>,
}

fn cmd_generate(a: GenerateArgs) -> CliResult {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.generation.seed = s;
    }
    if a.preset.is_some() {
        cfg.preset = a.preset;
    }
    if a.scale.is_some() {
        cfg.scale = a.scale;
    }
    if let Some(m) = a.max_objects {
        cfg.generation.max_objects = m;
    }
    for (t, n) in &a.quotas {
        cfg.generation.quotas.insert(*t, *n);
    }
    if a.rephrase {
        cfg.rephrase.enabled = true;
    }
    if let Some(b) = a.backend {
        cfg.rephrase.backend = match b {
            BackendArg::Mock => BackendKind::Mock,
            BackendArg::Http => BackendKind::Http,
        };
    }
    if a.prompts.is_some() {
        cfg.rephrase.prompts_dir = a.prompts.clone();
    }
    let c = &a.corpus;
    let section = &cfg.corpus;
    let paths = CorpusPaths {
        scenes: c
            .scenes
            .clone()
            .or_else(|| section.scenes.clone())
            .ok_or_else(|| Failure::usage(anyhow!("no scene directory (use --scenes or [corpus] scenes)")))?,
        sr3d: c.sr3d.clone().or_else(|| section.sr3d.clone()),
        qa: c.qa.clone().or_else(|| section.qa.clone()),
        captions: c.captions.clone().or_else(|| section.captions.clone()),
        lexicon: c.lexicon.clone().or_else(|| section.lexicon.clone()),
    };

    let mut gen = cfg.generation.clone();
    gen.quotas = cfg.effective_quotas().map_err(Failure::usage)?;
    gen.quotas.retain(|_, n| *n > 0);
    gen.validate().map_err(Failure::usage)?;

    let (corpus, corpus_hashes) = load_corpus(&paths, gen.max_objects).map_err(Failure::usage)?;
    if !corpus.quarantine.is_empty() {
        eprintln!("quarantined {} corpus record(s)", corpus.quarantine.len());
        for r in corpus.quarantine.iter().take(10) {
            eprintln!("  {}:{}: {}", r.source, r.line, r.reason);
        }
    }
    check_plan(&gen.quotas, &capacities(&corpus, &gen)).map_err(Failure::usage)?;
    let generated = generate(&corpus, &gen).map_err(Failure::usage)?;
    if !generated.skipped.is_empty() {
        eprintln!("skipped {} source record(s)", generated.skipped.len());
    }

    let mut samples = generated.samples;
    let mut transport_failures = 0;
    if cfg.rephrase.enabled {
        let prompts = prompts_for(cfg.rephrase.prompts_dir.as_deref())?;
        let backend = backend_for(cfg.rephrase.backend, &cfg, gen.seed);
        let (out, report) = rephrase_samples(&samples, &prompts, backend.as_ref(), &cfg.rephrase.pipeline_config(gen.seed));
        print_rephrase_report(&report);
        transport_failures = report.transport_failures;
        samples = out;
    }

    let hashed = HashedConfig {
        generation: &gen,
        rephrase: cfg.rephrase.enabled.then_some(&cfg.rephrase),
    };
    let manifest = write_with_manifest(
        &a.out,
        ManifestInputs {
            seed: gen.seed,
            config_hash: config_hash(&hashed),
            corpus_hashes,
            generated_at: timestamp(a.timestamp),
            samples: &samples,
        },
    )
    .map_err(Failure::usage)?;
    print_counts(&manifest);
    if transport_failures > 0 {
        return Err(Failure::backend(format!(
            "{transport_failures} rephrase request(s) failed at the transport level; originals kept"
        )));
    }
    Ok(())
}

fn cmd_rephrase(a: RephraseArgs) -> CliResult {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(b) = a.backend {
        cfg.rephrase.backend = match b {
            BackendArg::Mock => BackendKind::Mock,
            BackendArg::Http => BackendKind::Http,
        };
    }
    if let Some(v) = a.attempt_budget {
        cfg.rephrase.attempt_budget = v;
    }
    if let Some(v) = a.max_in_flight {
        cfg.rephrase.max_in_flight = v;
    }
    if let Some(m) = a.benchmark_mode {
        cfg.rephrase.benchmark_mode = match m {
            ModeArg::Duplicate => BenchmarkMode::Duplicate,
            ModeArg::InPlace => BenchmarkMode::InPlace,
        };
    }
    if a.prompts.is_some() {
        cfg.rephrase.prompts_dir = a.prompts.clone();
    }
    let samples = read_dataset(&a.input).map_err(Failure::usage)?;
    let source_manifest = DatasetManifest::read(&manifest_path(&a.input)).ok();
    let seed = a
        .seed
        .or(source_manifest.as_ref().map(|m| m.seed))
        .unwrap_or(0);
    let prompts = prompts_for(cfg.rephrase.prompts_dir.as_deref())?;
    let backend = backend_for(cfg.rephrase.backend, &cfg, seed);
    let (out, report) = rephrase_samples(&samples, &prompts, backend.as_ref(), &cfg.rephrase.pipeline_config(seed));
    print_rephrase_report(&report);
    let parent_hash = source_manifest.as_ref().map(|m| m.config_hash.clone());
    let manifest = write_with_manifest(
        &a.out,
        ManifestInputs {
            seed,
            config_hash: config_hash(&json!({"source": parent_hash, "rephrase": cfg.rephrase})),
            corpus_hashes: source_manifest.map(|m| m.corpus_hashes).unwrap_or_default(),
            generated_at: timestamp(a.timestamp),
            samples: &out,
        },
    )
    .map_err(Failure::usage)?;
    print_counts(&manifest);
    if report.transport_failures > 0 {
        return Err(Failure::backend(format!(
            "{} rephrase request(s) failed at the transport level; originals kept",
            report.transport_failures
        )));
    }
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> CliResult {
    let samples = read_dataset(&a.input).map_err(Failure::usage)?;
    let mpath = manifest_path(&a.input);
    let manifest = if mpath.exists() {
        Some(DatasetManifest::read(&mpath).map_err(Failure::usage)?)
    } else {
        None
    };
    let scenes = match &a.scenes {
        Some(d) => Some(load_scene_dir(d, a.max_objects).map_err(Failure::usage)?),
        None => None,
    };
    let index = scenes.as_ref().map(|s| SceneIndex::new(s.iter()));
    let report = validate(&samples, index.as_ref(), manifest.as_ref());
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        for v in &report.violations {
            println!("{v}");
        }
        println!(
            "{} samples, {} violation(s); scenes {}, manifest {}",
            report.samples,
            report.violations.len(),
            if report.scenes_checked { "checked" } else { "not checked" },
            if report.manifest_checked { "checked" } else { "absent" },
        );
    }
    if report.ok() {
        Ok(())
    } else {
        Err(Failure::validation(format!("{} violation(s)", report.violations.len())))
    }
}

fn cmd_stats(a: StatsArgs) -> CliResult {
    let samples = read_dataset(&a.input).map_err(Failure::usage)?;
    let manifest = DatasetManifest::read(&manifest_path(&a.input)).ok();
    let report = compute_stats(&samples, a.top, manifest);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        print!("{}", report.table());
    }
    Ok(())
}

fn read_predictions(path: &Path) -> anyhow::Result<Vec<Prediction>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn cmd_eval(a: EvalArgs) -> CliResult {
    let samples = read_dataset(&a.dataset).map_err(Failure::usage)?;
    let preds = read_predictions(&a.predictions)?;
    let scenes = load_scene_dir(&a.scenes, a.max_objects).map_err(Failure::usage)?;
    let index = SceneIndex::new(scenes.iter());
    let opts = EvalOptions {
        matching: match a.matching {
            MatchingArg::Greedy => Matching::Greedy,
            MatchingArg::Optimal => Matching::Optimal,
        },
        refined_substring: !a.no_refined,
        ..EvalOptions::default()
    };
    let report = evaluate(&samples, &preds, &index, &opts);
    print!("{}", report.table());
    if !report.diagnostics.is_empty() {
        eprintln!("{} diagnostic(s)", report.diagnostics.len());
        for d in report.diagnostics.iter().take(10) {
            eprintln!("  {d}");
        }
    }
    if let Some(p) = &a.report {
        fs::write(p, serde_json::to_string_pretty(&report).expect("serializable"))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RapFixture {
    uni3d: Vec<Vec<f64>>,
    mask3d: Vec<Vec<f64>>,
    pos: Vec<Vec<f64>>,
    #[serde(default)]
    rap: Option<Rap>,
}

fn matrix(name: &str, rows: Vec<Vec<f64>>) -> anyhow::Result<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        bail!("{name}: rows have different lengths");
    }
    Ok(Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect())?)
}

fn cmd_rap_check(a: RapCheckArgs) -> CliResult {
    let (batch, rap) = match &a.fixture {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let fx: RapFixture = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            let batch = FeatureBatch::new(matrix("uni3d", fx.uni3d)?, matrix("mask3d", fx.mask3d)?, matrix("pos", fx.pos)?)
                .map_err(Failure::usage)?;
            let rap = match fx.rap {
                Some(r) => r,
                None => {
                    let dims = RapDims {
                        uni3d: batch.uni3d.ncols(),
                        mask3d: batch.mask3d.ncols(),
                        pos: batch.pos.ncols(),
                        hidden: a.hidden,
                    };
                    Rap::seeded(dims, a.depth, a.seed).map_err(Failure::usage)?
                }
            };
            (batch, rap)
        }
        None => {
            let dims = RapDims {
                hidden: a.hidden,
                ..RapDims::default()
            };
            (
                FeatureBatch::random(a.rows, dims, a.seed),
                Rap::seeded(dims, a.depth, a.seed).map_err(Failure::usage)?,
            )
        }
    };
    let output = rap.forward(&batch).map_err(Failure::usage)?;
    let report = property_report(&rap, &batch, a.seed).map_err(Failure::usage)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    if let Some(p) = &a.out {
        let rows: Vec<Vec<f64>> = output.rows().into_iter().map(|r| r.to_vec()).collect();
        let doc = json!({"output": rows, "report": report});
        fs::write(p, serde_json::to_string(&doc).expect("serializable") + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if report.passes() {
        Ok(())
    } else {
        Err(Failure::validation("projector property check failed".into()))
    }
}

fn cmd_synth(a: SynthArgs) -> CliResult {
    let spec = SynthSpec {
        seed: a.seed,
        scenes: a.scenes,
        ..SynthSpec::default()
    };
    let corpus = synthesize(&spec);
    let paths = corpus
        .write(&a.out)
        .with_context(|| format!("writing corpus to {}", a.out.display()))?;
    let mut counts = BTreeMap::new();
    counts.insert("scenes", corpus.scenes.len());
    counts.insert("sr3d", corpus.refs.len());
    counts.insert("qa", corpus.qa.len());
    counts.insert("captions", corpus.captions.len());
    for (k, v) in counts {
        println!("{k:<10} {v}");
    }
    println!("scene dir  {}", paths.scenes.display());
    Ok(())
}

/// Convenience for tests and callers: the generated samples of a dataset file.
pub fn load_samples(path: &Path) -> anyhow::Result<Vec<InstructionSample>> {
    Ok(read_dataset(path)?)
}
