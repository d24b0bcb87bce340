//! Turning group-level quotas into per-task quotas.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Capacity;
use crate::sample::{Task, TaskGroup};

/// Full-size group totals of the reference mix.
pub const PAPER_MIX: GroupQuotas = GroupQuotas {
    adversarial: 344_000,
    diverse: 508_000,
    benchmark: 165_000,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupQuotas {
    pub adversarial: usize,
    pub diverse: usize,
    pub benchmark: usize,
}

impl GroupQuotas {
    pub fn get(&self, g: TaskGroup) -> usize {
        match g {
            TaskGroup::Adversarial => self.adversarial,
            TaskGroup::Diverse => self.diverse,
            TaskGroup::Benchmark => self.benchmark,
        }
    }

    pub fn total(&self) -> usize {
        self.adversarial + self.diverse + self.benchmark
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    PaperMix,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-mix" => Ok(Preset::PaperMix),
            other => Err(format!("unknown preset '{other}' (known: paper-mix)")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ComposeError {
    #[error("scale must be finite and non-negative, got {0}")]
    BadScale(f64),
    #[error("{task}: quota {requested} exceeds what the corpus supports (at most {available})")]
    Shortfall {
        task: Task,
        requested: usize,
        available: usize,
    },
}

/// Group totals of `preset` multiplied by `scale`, rounded half away from zero.
pub fn preset_quotas(preset: Preset, scale: f64) -> Result<GroupQuotas, ComposeError> {
    if !scale.is_finite() || scale < 0.0 {
        return Err(ComposeError::BadScale(scale));
    }
    let base = match preset {
        Preset::PaperMix => PAPER_MIX,
    };
    let r = |n: usize| (n as f64 * scale).round() as usize;
    Ok(GroupQuotas {
        adversarial: r(base.adversarial),
        diverse: r(base.diverse),
        benchmark: r(base.benchmark),
    })
}

/// Split a group total evenly over its tasks; the remainder goes one each
/// to the first tasks in declaration order.
pub fn split_group(group: TaskGroup, total: usize) -> BTreeMap<Task, usize> {
    let tasks: Vec<Task> = group.tasks().collect();
    let k = tasks.len();
    tasks
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t, total / k + usize::from(i < total % k)))
        .collect()
}

/// Per-task quotas for every task; `overrides` replace individual entries.
pub fn plan(groups: GroupQuotas, overrides: &BTreeMap<Task, usize>) -> BTreeMap<Task, usize> {
    let mut out = BTreeMap::new();
    for g in TaskGroup::ALL {
        out.extend(split_group(g, groups.get(g)));
    }
    out.extend(overrides.iter().map(|(t, n)| (*t, *n)));
    out
}

/// First task whose quota exceeds its capacity.
pub fn check_plan(plan: &BTreeMap<Task, usize>, caps: &BTreeMap<Task, Capacity>) -> Result<(), ComposeError> {
    for (task, &n) in plan {
        let cap = caps.get(task).copied().unwrap_or(Capacity::Finite(0));
        if n > 0 && !cap.admits(n) {
            return Err(ComposeError::Shortfall {
                task: *task,
                requested: n,
                available: cap.max().unwrap_or(0),
            });
        }
    }
    Ok(())
}
