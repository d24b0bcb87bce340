//! Template transforms turning corpus records into diverse-task samples.

use thiserror::Error;

use crate::adversarial::with_article;
use crate::corpus::{CaptionKind, CaptionRecord, QaRecord, Sr3dReference};
use crate::metrics::answer::{render_segments, AnswerSegment};
use crate::sample::{InstructionSample, Task};
use crate::scene::{canonical_category, SceneGraph};

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("task {task} cannot be built from a {record} record")]
    KindMismatch { task: Task, record: &'static str },
    #[error("record references {what} not found in scene {scene}")]
    Unresolvable { scene: String, what: String },
}

/// Record handed to a transform.
#[derive(Debug, Clone, Copy)]
pub enum SourceRecord<'a> {
    Caption(&'a CaptionRecord),
    Sr3d(&'a Sr3dReference),
    Qa(&'a QaRecord),
}

impl SourceRecord<'_> {
    pub fn kind(&self) -> &'static str {
        match self {
            SourceRecord::Caption(c) => c.kind.as_str(),
            SourceRecord::Sr3d(_) => "sr3d",
            SourceRecord::Qa(_) => "qa",
        }
    }

    pub fn scene_id(&self) -> &str {
        match self {
            SourceRecord::Caption(c) => &c.scene_id,
            SourceRecord::Sr3d(r) => &r.scene_id,
            SourceRecord::Qa(q) => &q.scene_id,
        }
    }
}

/// Caption kind a diverse task is built from, if it is caption-based.
pub fn caption_source(task: Task) -> Option<CaptionKind> {
    match task {
        Task::DiverseCategoryQa => Some(CaptionKind::CategoryQa),
        Task::DiverseNr3dCaption | Task::DiverseNr3dGrounding => Some(CaptionKind::Nr3dCaption),
        Task::DiverseAppearance => Some(CaptionKind::Appearance),
        Task::DiverseRegion => Some(CaptionKind::Region),
        _ => None,
    }
}

fn unresolvable(scene: &SceneGraph, what: String) -> TransformError {
    TransformError::Unresolvable {
        scene: scene.scene_id().to_string(),
        what,
    }
}

fn caption_for<'a>(
    task: Task,
    record: SourceRecord<'a>,
    scene: &SceneGraph,
) -> Result<&'a CaptionRecord, TransformError> {
    let mismatch = || TransformError::KindMismatch {
        task,
        record: record.kind(),
    };
    let SourceRecord::Caption(c) = record else {
        return Err(mismatch());
    };
    if caption_source(task) != Some(c.kind) {
        return Err(mismatch());
    }
    if c.scene_id != scene.scene_id() || !scene.contains(c.object_id) {
        return Err(unresolvable(scene, c.object_id.token()));
    }
    Ok(c)
}

/// Build one diverse-task sample from a record.
pub fn transform(
    task: Task,
    record: SourceRecord<'_>,
    scene: &SceneGraph,
    sample_id: String,
) -> Result<InstructionSample, TransformError> {
    let sid = scene.scene_id();
    let sample = match task {
        Task::DiverseCategoryQa => {
            let c = caption_for(task, record, scene)?;
            let category = canonical_category(&c.text);
            let truth = &scene.object(c.object_id).expect("checked").category;
            if &category != truth {
                return Err(unresolvable(scene, format!("category '{category}' for {}", c.object_id)));
            }
            InstructionSample::new(
                sample_id,
                task,
                sid,
                format!("What is the category of {}?", c.object_id.token()),
                format!("It is {}.", with_article(&category)),
            )
        }
        Task::DiverseNr3dCaption => {
            let c = caption_for(task, record, scene)?;
            InstructionSample::new(
                sample_id,
                task,
                sid,
                format!(
                    "Describe the spatial relationship of {} to its nearby objects.",
                    c.object_id.token()
                ),
                c.text.trim(),
            )
        }
        Task::DiverseAppearance => {
            let c = caption_for(task, record, scene)?;
            InstructionSample::new(
                sample_id,
                task,
                sid,
                format!("Describe the appearance of {}.", c.object_id.token()),
                c.text.trim(),
            )
        }
        Task::DiverseRegion => {
            let c = caption_for(task, record, scene)?;
            InstructionSample::new(
                sample_id,
                task,
                sid,
                format!(
                    "Describe the region around {} and the objects it contains.",
                    c.object_id.token()
                ),
                c.text.trim(),
            )
        }
        Task::DiverseNr3dGrounding => {
            let c = caption_for(task, record, scene)?;
            InstructionSample::new(
                sample_id,
                task,
                sid,
                c.text.trim(),
                render_segments(&[AnswerSegment::ids(vec![c.object_id])]),
            )
        }
        Task::DiverseSr3dGrounding => {
            let SourceRecord::Sr3d(r) = record else {
                return Err(TransformError::KindMismatch {
                    task,
                    record: record.kind(),
                });
            };
            if r.scene_id != sid || !scene.contains(r.target_id) {
                return Err(unresolvable(scene, r.target_id.token()));
            }
            InstructionSample::new(
                sample_id,
                task,
                sid,
                r.surface_text.trim(),
                render_segments(&[AnswerSegment::ids(vec![r.target_id])]),
            )
            .with_meta("relation", r.relation.as_str())
        }
        _ => {
            return Err(TransformError::KindMismatch {
                task,
                record: record.kind(),
            })
        }
    };
    Ok(sample.with_meta("source_kind", record.kind()))
}
