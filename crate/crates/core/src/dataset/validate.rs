//! Dataset consistency checks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{to_jsonl, DatasetManifest};
use crate::corpus::sha256_hex;
use crate::metrics::SceneIndex;
use crate::sample::{InstructionSample, Task};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub scenes_checked: bool,
    pub manifest_checked: bool,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check id/text consistency, unique sample ids, scene references (when
/// `scenes` is given) and manifest counts (when `manifest` is given).
pub fn validate(
    samples: &[InstructionSample],
    scenes: Option<&SceneIndex<'_>>,
    manifest: Option<&DatasetManifest>,
) -> ValidationReport {
    let mut report = ValidationReport {
        samples: samples.len(),
        scenes_checked: scenes.is_some(),
        manifest_checked: manifest.is_some(),
        violations: Vec::new(),
    };
    let mut seen = BTreeSet::new();
    for (i, s) in samples.iter().enumerate() {
        let line = i + 1;
        if !seen.insert(s.sample_id.as_str()) {
            report
                .violations
                .push(format!("line {line} ({}): duplicate sample_id", s.sample_id));
        }
        let problems = match scenes {
            Some(idx) => s.violations(idx.get(&s.scene_id)),
            None => s.text_violations(),
        };
        report
            .violations
            .extend(problems.into_iter().map(|p| format!("line {line} ({}): {p}", s.sample_id)));
    }
    if let Some(m) = manifest {
        let mut actual: BTreeMap<Task, usize> = Task::ALL.iter().map(|t| (*t, 0)).collect();
        for s in samples {
            *actual.entry(s.task).or_default() += 1;
        }
        if m.total != samples.len() {
            report
                .violations
                .push(format!("manifest total {} but dataset has {} samples", m.total, samples.len()));
        }
        for (t, n) in &actual {
            let claimed = m.counts.get(t).copied().unwrap_or(0);
            if claimed != *n {
                report
                    .violations
                    .push(format!("manifest count for {t} is {claimed} but dataset has {n}"));
            }
        }
        let digest = sha256_hex(to_jsonl(samples).as_bytes());
        if m.dataset_sha256 != digest {
            report
                .violations
                .push("manifest dataset_sha256 does not match the dataset".to_string());
        }
    }
    report
}
