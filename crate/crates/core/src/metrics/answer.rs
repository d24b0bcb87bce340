//! The grounded-answer grammar.
//!
//! An answer is a list of segments separated by `"; "`. Each segment is an
//! optional leading verdict (`Yes` / `No`), optional free text, and a list of
//! space-separated object tokens:
//!
//! ```text
//! Yes, <OBJ003> <OBJ007>; No; Yes, <OBJ005>
//! No, it is a chair
//! It is 'lying on', <OBJ012>
//! ```

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::sample::object_tokens_in;
use crate::scene::ObjectId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSegment {
    pub verdict: Verdict,
    pub correction: Option<String>,
    pub ids: Vec<ObjectId>,
}

impl AnswerSegment {
    pub fn yes(ids: Vec<ObjectId>) -> Self {
        Self {
            verdict: Verdict::Yes,
            correction: None,
            ids,
        }
    }

    pub fn no() -> Self {
        Self {
            verdict: Verdict::No,
            correction: None,
            ids: Vec::new(),
        }
    }

    pub fn no_with(correction: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::No,
            correction: Some(correction.into()),
            ids: Vec::new(),
        }
    }

    pub fn text(text: impl Into<String>, ids: Vec<ObjectId>) -> Self {
        Self {
            verdict: Verdict::None,
            correction: Some(text.into()),
            ids,
        }
    }

    pub fn ids(ids: Vec<ObjectId>) -> Self {
        Self {
            verdict: Verdict::None,
            correction: None,
            ids,
        }
    }

    pub fn render(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        match self.verdict {
            Verdict::Yes => parts.push("Yes"),
            Verdict::No => parts.push("No"),
            Verdict::None => {}
        }
        if let Some(c) = &self.correction {
            parts.push(c);
        }
        let mut out = parts.join(", ");
        if !self.ids.is_empty() {
            if !out.is_empty() {
                out.push_str(", ");
            }
            let ids: Vec<String> = self.ids.iter().map(|i| i.token()).collect();
            out.push_str(&ids.join(" "));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedAnswer {
    pub segments: Vec<AnswerSegment>,
    pub raw: String,
    pub diagnostics: Vec<String>,
}

impl GroundedAnswer {
    pub fn from_segments(segments: Vec<AnswerSegment>) -> Self {
        let raw = render_segments(&segments);
        Self {
            segments,
            raw,
            diagnostics: Vec::new(),
        }
    }

    /// All ids across segments in order of occurrence.
    pub fn ids(&self) -> Vec<ObjectId> {
        self.segments.iter().flat_map(|s| s.ids.iter().copied()).collect()
    }

    pub fn render(&self) -> String {
        render_segments(&self.segments)
    }
}

pub fn render_segments(segments: &[AnswerSegment]) -> String {
    segments
        .iter()
        .map(AnswerSegment::render)
        .collect::<Vec<_>>()
        .join("; ")
}

fn loose_token() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)<\s*obj[^<>;]*>?").expect("valid pattern"))
}

fn strict_token() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^<OBJ\d+>$").expect("valid pattern"))
}

fn verdict_prefix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^(yes|no)\b[\s,.:!]*").expect("valid pattern"))
}

/// Parse a model answer. Never fails; malformed id tokens are removed from
/// the text and listed in `diagnostics`.
pub fn parse_answer(raw: &str) -> GroundedAnswer {
    let mut diagnostics = Vec::new();
    let mut segments = Vec::new();
    if raw.trim().is_empty() {
        return GroundedAnswer {
            segments,
            raw: raw.to_string(),
            diagnostics,
        };
    }
    for (i, seg) in raw.split(';').enumerate() {
        let seg = seg.trim();
        if seg.is_empty() {
            diagnostics.push(format!("segment {i} is empty"));
            continue;
        }
        for m in loose_token().find_iter(seg) {
            if !strict_token().is_match(m.as_str()) {
                diagnostics.push(format!("segment {i}: malformed id token '{}'", m.as_str()));
            }
        }
        let ids = object_tokens_in(seg);
        let text = loose_token().replace_all(seg, " ");
        let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
        let (verdict, rest) = match verdict_prefix().captures(&text) {
            Some(c) => {
                let v = if c[1].eq_ignore_ascii_case("yes") {
                    Verdict::Yes
                } else {
                    Verdict::No
                };
                (v, &text[c.get(0).map_or(0, |m| m.end())..])
            }
            None => (Verdict::None, text.as_str()),
        };
        let rest = rest.trim_matches(|c: char| c == ',' || c.is_whitespace());
        segments.push(AnswerSegment {
            verdict,
            correction: (!rest.is_empty()).then(|| rest.to_string()),
            ids,
        });
    }
    GroundedAnswer {
        segments,
        raw: raw.to_string(),
        diagnostics,
    }
}
