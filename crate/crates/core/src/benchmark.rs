//! Benchmark-styled training samples rendered in the grounded answer grammar.

use crate::adversarial::grounding_question;
use crate::corpus::{CaptionKind, CaptionRecord, QaRecord};
use crate::diverse::transform::TransformError;
use crate::metrics::answer::{render_segments, AnswerSegment};
use crate::sample::{InstructionSample, Task};
use crate::scene::SceneGraph;

pub const SCANQA_SUFFIX: &str = "Answer the question using a single word or phrase.";

fn checked_caption<'a>(
    task: Task,
    c: &'a CaptionRecord,
    scene: &SceneGraph,
) -> Result<&'a CaptionRecord, TransformError> {
    if c.kind != CaptionKind::Appearance {
        return Err(TransformError::KindMismatch {
            task,
            record: c.kind.as_str(),
        });
    }
    if c.scene_id != scene.scene_id() || !scene.contains(c.object_id) {
        return Err(TransformError::Unresolvable {
            scene: scene.scene_id().to_string(),
            what: c.object_id.token(),
        });
    }
    Ok(c)
}

/// Single-target grounding from an object description.
pub fn scanrefer(c: &CaptionRecord, scene: &SceneGraph, sample_id: String) -> Result<InstructionSample, TransformError> {
    let c = checked_caption(Task::BenchmarkScanrefer, c, scene)?;
    Ok(InstructionSample::new(
        sample_id,
        Task::BenchmarkScanrefer,
        scene.scene_id(),
        grounding_question(c.text.trim()),
        render_segments(&[AnswerSegment::ids(vec![c.object_id])]),
    ))
}

/// Multi-target grounding of every instance of `category`; zero instances
/// gives a zero-target sample answered "No".
pub fn multi3drefer(scene: &SceneGraph, category: &str, sample_id: String) -> InstructionSample {
    let ids = scene.instances_of(category);
    let answer = if ids.is_empty() {
        AnswerSegment::no()
    } else {
        AnswerSegment::ids(ids)
    };
    InstructionSample::new(
        sample_id,
        Task::BenchmarkMulti3drefer,
        scene.scene_id(),
        format!(
            "Are there any objects fitting the description of \"the {category}\"? If so, kindly provide the IDs for those objects."
        ),
        render_segments(&[answer]),
    )
    .with_meta("category", category)
}

pub fn scanqa(q: &QaRecord, scene: &SceneGraph, sample_id: String) -> Result<InstructionSample, TransformError> {
    if q.scene_id != scene.scene_id() {
        return Err(TransformError::Unresolvable {
            scene: scene.scene_id().to_string(),
            what: format!("question from scene {}", q.scene_id),
        });
    }
    Ok(InstructionSample::new(
        sample_id,
        Task::BenchmarkScanqa,
        scene.scene_id(),
        format!("{} {SCANQA_SUFFIX}", q.question.trim()),
        q.answer.trim(),
    ))
}

pub fn scan2cap(c: &CaptionRecord, scene: &SceneGraph, sample_id: String) -> Result<InstructionSample, TransformError> {
    let c = checked_caption(Task::BenchmarkScan2cap, c, scene)?;
    Ok(InstructionSample::new(
        sample_id,
        Task::BenchmarkScan2cap,
        scene.scene_id(),
        format!(
            "Develop a description of the object {} in the 3D scene, capturing its appearance and its spatial relation.",
            c.object_id.token()
        ),
        c.text.trim(),
    ))
}
