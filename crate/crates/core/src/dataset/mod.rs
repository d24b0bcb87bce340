//! JSON-lines datasets and their manifests.

pub mod compose;
pub mod stats;
pub mod validate;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::sha256_hex;
use crate::sample::{InstructionSample, Task, TaskGroup};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Schema { path: String, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// `out.jsonl` -> `out.jsonl.manifest.json`
pub fn manifest_path(dataset: &Path) -> PathBuf {
    let mut name = dataset.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// One sample per line, keys in declaration order.
pub fn to_jsonl(samples: &[InstructionSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn write_dataset(samples: &[InstructionSample], path: &Path) -> Result<(), DatasetError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        serde_json::to_writer(&mut w, s).map_err(|e| io_err(path)(e.into()))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn parse_dataset(source: &str, text: &str) -> Result<Vec<InstructionSample>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Schema {
                path: source.to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<Vec<InstructionSample>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_dataset(&path.display().to_string(), &text)
}

/// Number of non-blank lines, read independently of the sample schema.
pub fn count_lines(path: &Path) -> Result<usize, DatasetError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut n = 0;
    for line in io::BufReader::new(f).lines() {
        if !line.map_err(io_err(path))?.trim().is_empty() {
            n += 1;
        }
    }
    Ok(n)
}

// ---------------------------------------------------------------------------
// manifest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub total: usize,
    /// Every task, including those with zero samples.
    pub counts: BTreeMap<Task, usize>,
    pub group_counts: BTreeMap<TaskGroup, usize>,
    pub proportions: BTreeMap<Task, f64>,
    pub group_proportions: BTreeMap<TaskGroup, f64>,
    pub seed: u64,
    pub config_hash: String,
    pub corpus_hashes: BTreeMap<String, String>,
    pub dataset_sha256: String,
    pub generated_at: Option<String>,
    pub generator: String,
}

/// SHA-256 of the canonical JSON form (object keys sorted).
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable");
    sha256_hex(serde_json::to_string(&v).expect("serializable").as_bytes())
}

pub struct ManifestInputs<'a> {
    pub seed: u64,
    pub config_hash: String,
    pub corpus_hashes: BTreeMap<String, String>,
    pub generated_at: Option<String>,
    pub samples: &'a [InstructionSample],
}

impl DatasetManifest {
    pub fn build(inputs: ManifestInputs<'_>) -> Self {
        let samples = inputs.samples;
        let mut counts: BTreeMap<Task, usize> = Task::ALL.iter().map(|t| (*t, 0)).collect();
        for s in samples {
            *counts.entry(s.task).or_default() += 1;
        }
        let mut group_counts: BTreeMap<TaskGroup, usize> = TaskGroup::ALL.iter().map(|g| (*g, 0)).collect();
        for (t, n) in &counts {
            *group_counts.entry(t.group()).or_default() += n;
        }
        let total = samples.len();
        let share = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
        Self {
            total,
            proportions: counts.iter().map(|(t, n)| (*t, share(*n))).collect(),
            group_proportions: group_counts.iter().map(|(g, n)| (*g, share(*n))).collect(),
            counts,
            group_counts,
            seed: inputs.seed,
            config_hash: inputs.config_hash,
            corpus_hashes: inputs.corpus_hashes,
            dataset_sha256: sha256_hex(to_jsonl(samples).as_bytes()),
            generated_at: inputs.generated_at,
            generator: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, self.to_json()).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Schema {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Write the dataset and its manifest sidecar.
pub fn write_with_manifest(path: &Path, inputs: ManifestInputs<'_>) -> Result<DatasetManifest, DatasetError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    write_dataset(inputs.samples, path)?;
    let manifest = DatasetManifest::build(inputs);
    manifest.write(&manifest_path(path))?;
    Ok(manifest)
}
