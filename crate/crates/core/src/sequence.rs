//! Token layouts for the language model: object-id vocabulary, id-wrapped
//! vision slots and the system / question / vision / answer ordering.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sample::InstructionSample;
use crate::scene::{ObjectId, SceneGraph, DEFAULT_MAX_OBJECTS};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SequenceError {
    #[error("object id {id} outside vocabulary of {n} ids")]
    IdOutOfRange { id: u32, n: usize },
    #[error("{slots} vision slots exceed vocabulary of {n} ids")]
    Oversize { slots: usize, n: usize },
    #[error("duplicate vision slot for {0}")]
    DuplicateSlot(ObjectId),
    #[error("vocabulary size {n} exceeds the maximum of {max}")]
    VocabularyTooLarge { n: usize, max: usize },
}

/// Special tokens `<OBJ000>` .. `<OBJ{n-1}>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdVocabulary {
    tokens: Vec<String>,
}

impl IdVocabulary {
    pub fn new(n: usize) -> Result<Self, SequenceError> {
        Self::with_max(n, DEFAULT_MAX_OBJECTS)
    }

    pub fn with_max(n: usize, max: usize) -> Result<Self, SequenceError> {
        if n > max {
            return Err(SequenceError::VocabularyTooLarge { n, max });
        }
        Ok(Self {
            tokens: (0..n as u32).map(|i| ObjectId(i).token()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: ObjectId) -> Result<&str, SequenceError> {
        self.tokens
            .get(id.0 as usize)
            .map(String::as_str)
            .ok_or(SequenceError::IdOutOfRange {
                id: id.0,
                n: self.len(),
            })
    }

    pub fn index_of(&self, token: &str) -> Option<ObjectId> {
        self.tokens.iter().position(|t| t == token).map(|i| ObjectId(i as u32))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Token {
    Text(String),
    Obj(ObjectId),
    /// Handle into a 3D feature table.
    Feat3d(usize),
    /// Handle into a 2D feature table.
    Feat2d(usize),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Text(t) => f.write_str(t),
            Token::Obj(id) => write!(f, "{id}"),
            Token::Feat3d(i) => write!(f, "[F3D:{i}]"),
            Token::Feat2d(i) => write!(f, "[F2D:{i}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisionSlot {
    pub object_id: ObjectId,
    pub feat3d: usize,
    pub feat2d: usize,
}

impl VisionSlot {
    /// Slot whose feature handles equal the object id.
    pub fn for_object(id: ObjectId) -> Self {
        Self {
            object_id: id,
            feat3d: id.0 as usize,
            feat2d: id.0 as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureOrder {
    #[default]
    ThreeDFirst,
    TwoDFirst,
}

/// `[id, f3d, f2d, id]`, or `[id, f2d, f3d, id]` with [`FeatureOrder::TwoDFirst`].
pub fn wrap_object(
    slot: &VisionSlot,
    vocab: &IdVocabulary,
    order: FeatureOrder,
) -> Result<[Token; 4], SequenceError> {
    vocab.token(slot.object_id)?;
    let (a, b) = match order {
        FeatureOrder::ThreeDFirst => (Token::Feat3d(slot.feat3d), Token::Feat2d(slot.feat2d)),
        FeatureOrder::TwoDFirst => (Token::Feat2d(slot.feat2d), Token::Feat3d(slot.feat3d)),
    };
    Ok([Token::Obj(slot.object_id), a, b, Token::Obj(slot.object_id)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    System,
    Question,
    Vision,
    Answer,
}

impl SegmentKind {
    pub const ORDER: [SegmentKind; 4] = [
        SegmentKind::System,
        SegmentKind::Question,
        SegmentKind::Vision,
        SegmentKind::Answer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::System => "system",
            SegmentKind::Question => "question",
            SegmentKind::Vision => "vision",
            SegmentKind::Answer => "answer",
        }
    }
}

/// Four segments in fixed order. Only [`assemble`] builds one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenSequence {
    segments: Vec<(SegmentKind, Vec<Token>)>,
}

impl TokenSequence {
    pub fn segments(&self) -> &[(SegmentKind, Vec<Token>)] {
        &self.segments
    }

    pub fn segment(&self, kind: SegmentKind) -> &[Token] {
        &self.segments[kind as usize].1
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All tokens with their segment kind, in order.
    pub fn flatten(&self) -> Vec<(SegmentKind, &Token)> {
        self.segments
            .iter()
            .flat_map(|(k, toks)| toks.iter().map(move |t| (*k, t)))
            .collect()
    }

    /// Object ids recovered from the wrapper tokens of the vision segment.
    pub fn vision_object_ids(&self) -> Vec<ObjectId> {
        self.segment(SegmentKind::Vision)
            .chunks(4)
            .filter_map(|c| match (c.first(), c.last()) {
                (Some(Token::Obj(a)), Some(Token::Obj(b))) if a == b && c.len() == 4 => Some(*a),
                _ => None,
            })
            .collect()
    }

    /// One line per segment: `kind: tok tok ...`.
    pub fn debug_dump(&self) -> String {
        self.segments
            .iter()
            .map(|(k, toks)| {
                let body: Vec<String> = toks.iter().map(Token::to_string).collect();
                format!("{}: {}", k.as_str(), body.join(" ")).trim_end().to_string()
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Lay out the sequence. Slots are sorted by ascending object id, so input
/// order does not matter.
pub fn assemble(
    system: Vec<Token>,
    question: Vec<Token>,
    slots: &[VisionSlot],
    answer: Vec<Token>,
    vocab: &IdVocabulary,
    order: FeatureOrder,
) -> Result<TokenSequence, SequenceError> {
    if slots.len() > vocab.len() {
        return Err(SequenceError::Oversize {
            slots: slots.len(),
            n: vocab.len(),
        });
    }
    let mut sorted = slots.to_vec();
    sorted.sort_by_key(|s| s.object_id);
    let mut seen = BTreeSet::new();
    let mut vision = Vec::with_capacity(4 * sorted.len());
    for slot in &sorted {
        if !seen.insert(slot.object_id) {
            return Err(SequenceError::DuplicateSlot(slot.object_id));
        }
        vision.extend(wrap_object(slot, vocab, order)?);
    }
    Ok(TokenSequence {
        segments: vec![
            (SegmentKind::System, system),
            (SegmentKind::Question, question),
            (SegmentKind::Vision, vision),
            (SegmentKind::Answer, answer),
        ],
    })
}

fn token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<OBJ(\d+)>").expect("valid pattern"))
}

/// Whitespace-split text with id tokens lifted out as [`Token::Obj`].
pub fn text_tokens(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let push_words = |s: &str, out: &mut Vec<Token>| {
        out.extend(s.split_whitespace().map(|w| Token::Text(w.to_string())));
    };
    let mut last = 0;
    for m in token_re().captures_iter(text) {
        let whole = m.get(0).expect("match");
        push_words(&text[last..whole.start()], &mut out);
        match m[1].parse::<u32>() {
            Ok(i) => out.push(Token::Obj(ObjectId(i))),
            Err(_) => push_words(whole.as_str(), &mut out),
        }
        last = whole.end();
    }
    push_words(&text[last..], &mut out);
    out
}

/// Sequence for a sample with one vision slot per scene object.
pub fn from_sample(
    sample: &InstructionSample,
    scene: &SceneGraph,
    system_prompt: &str,
    vocab: &IdVocabulary,
    order: FeatureOrder,
) -> Result<TokenSequence, SequenceError> {
    let slots: Vec<VisionSlot> = scene
        .objects()
        .iter()
        .map(|o| VisionSlot::for_object(o.object_id))
        .collect();
    assemble(
        text_tokens(system_prompt),
        text_tokens(&sample.question),
        &slots,
        text_tokens(&sample.answer),
        vocab,
        order,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(i: u32) -> VisionSlot {
        VisionSlot::for_object(ObjectId(i))
    }

    #[test]
    fn wrap_and_order() {
        let v = IdVocabulary::new(150).unwrap();
        let w = wrap_object(&slot(7), &v, FeatureOrder::ThreeDFirst).unwrap();
        assert_eq!(w, [Token::Obj(ObjectId(7)), Token::Feat3d(7), Token::Feat2d(7), Token::Obj(ObjectId(7))]);
        let w = wrap_object(&slot(7), &v, FeatureOrder::TwoDFirst).unwrap();
        assert_eq!(w[1], Token::Feat2d(7));
        assert!(matches!(
            wrap_object(&slot(150), &v, FeatureOrder::ThreeDFirst),
            Err(SequenceError::IdOutOfRange { .. })
        ));

        let s = assemble(vec![], vec![], &[slot(5), slot(2)], vec![], &v, FeatureOrder::ThreeDFirst).unwrap();
        assert_eq!(s.vision_object_ids(), vec![ObjectId(2), ObjectId(5)]);
        let all: Vec<VisionSlot> = (0..150).map(slot).collect();
        let s = assemble(vec![], vec![], &all, vec![], &v, FeatureOrder::ThreeDFirst).unwrap();
        assert_eq!(s.segment(SegmentKind::Vision).len(), 600);
    }

    #[test]
    fn errors() {
        let v = IdVocabulary::new(3).unwrap();
        let four: Vec<VisionSlot> = (0..4).map(slot).collect();
        assert!(matches!(
            assemble(vec![], vec![], &four, vec![], &v, FeatureOrder::ThreeDFirst),
            Err(SequenceError::Oversize { .. })
        ));
        assert_eq!(
            assemble(vec![], vec![], &[slot(1), slot(1)], vec![], &v, FeatureOrder::ThreeDFirst),
            Err(SequenceError::DuplicateSlot(ObjectId(1)))
        );
        assert!(IdVocabulary::new(151).is_err());
    }

    #[test]
    fn vocabulary_is_a_bijection() {
        let v = IdVocabulary::new(150).unwrap();
        let distinct: BTreeSet<&String> = v.tokens().iter().collect();
        assert_eq!(distinct.len(), 150);
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.index_of(t), Some(ObjectId(i as u32)));
        }
    }

    #[test]
    fn dump_and_text_tokens() {
        let v = IdVocabulary::new(10).unwrap();
        let s = assemble(
            text_tokens("You are helpful."),
            text_tokens("Where is <OBJ003>?"),
            &[slot(3)],
            text_tokens("<OBJ003>"),
            &v,
            FeatureOrder::ThreeDFirst,
        )
        .unwrap();
        assert_eq!(
            s.debug_dump(),
            "system: You are helpful.\nquestion: Where is <OBJ003> ?\nvision: <OBJ003> [F3D:3] [F2D:3] <OBJ003>\nanswer: <OBJ003>"
        );
        let empty = assemble(vec![], vec![], &[], vec![], &v, FeatureOrder::ThreeDFirst).unwrap();
        assert_eq!(empty.debug_dump(), "system:\nquestion:\nvision:\nanswer:");
    }
}
