//! Loading and validation of the annotation corpora: scenes, templated
//! spatial references, QA pairs and caption records.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scene::{canonical_category, Aabb3, ObjectId, ObjectInstance, SceneError, SceneGraph};

/// Relation lexicon shipped with the engine.
pub const DEFAULT_LEXICON: &str = include_str!("../assets/relations.json");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: schema violation: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Scene {
        path: PathBuf,
        #[source]
        source: SceneError,
    },
    #[error("duplicate scene id {0}")]
    DuplicateScene(String),
    #[error("relation lexicon: {0}")]
    Lexicon(String),
}

fn read(path: &Path) -> Result<Vec<u8>, CorpusError> {
    fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// relation lexicon

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationEntry {
    pub surface_forms: Vec<String>,
    #[serde(default)]
    pub synonyms: Vec<String>,
    pub template: String,
}

/// Where a relation phrase was found inside a surface text.
#[derive(Debug, Clone, PartialEq)]
pub struct FormMatch {
    pub start: usize,
    pub end: usize,
    pub form: String,
}

#[derive(Debug, Clone)]
pub struct RelationLexicon {
    entries: BTreeMap<String, RelationEntry>,
    // per relation: (form, pattern), longest form first
    patterns: BTreeMap<String, Vec<(String, Regex)>>,
}

impl RelationLexicon {
    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let raw: BTreeMap<String, RelationEntry> =
            serde_json::from_str(text).map_err(|e| CorpusError::Lexicon(e.to_string()))?;
        let mut entries = BTreeMap::new();
        let mut patterns = BTreeMap::new();
        for (name, mut entry) in raw {
            let name = canonical_category(&name);
            if entry.surface_forms.is_empty() {
                return Err(CorpusError::Lexicon(format!(
                    "relation '{name}' has no surface forms"
                )));
            }
            for form in entry.surface_forms.iter_mut().chain(entry.synonyms.iter_mut()) {
                *form = canonical_category(form);
            }
            let mut forms: Vec<String> = entry
                .surface_forms
                .iter()
                .chain(entry.synonyms.iter())
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            forms.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            let compiled = forms
                .into_iter()
                .map(|f| {
                    let re = Regex::new(&format!(r"(?i)\b{}\b", regex::escape(&f)))
                        .expect("escaped phrase is a valid pattern");
                    (f, re)
                })
                .collect();
            patterns.insert(name.clone(), compiled);
            entries.insert(name, entry);
        }
        if entries.is_empty() {
            return Err(CorpusError::Lexicon("lexicon is empty".into()));
        }
        Ok(Self { entries, patterns })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let bytes = read(path)?;
        Self::from_json(&String::from_utf8_lossy(&bytes))
    }

    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_LEXICON).expect("shipped lexicon parses")
    }

    pub fn contains(&self, relation: &str) -> bool {
        self.entries.contains_key(relation)
    }

    pub fn get(&self, relation: &str) -> Option<&RelationEntry> {
        self.entries.get(relation)
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Surface forms plus synonyms.
    pub fn forms(&self, relation: &str) -> Vec<&str> {
        self.patterns
            .get(relation)
            .map(|p| p.iter().map(|(f, _)| f.as_str()).collect())
            .unwrap_or_default()
    }

    /// Earliest occurrence of any of the relation's phrases in `text`,
    /// preferring the longest phrase at a given position.
    pub fn find_form(&self, relation: &str, text: &str) -> Option<FormMatch> {
        let mut best: Option<FormMatch> = None;
        for (form, re) in self.patterns.get(relation)? {
            if let Some(m) = re.find(text) {
                let better = match &best {
                    None => true,
                    Some(b) => m.start() < b.start || (m.start() == b.start && m.end() > b.end),
                };
                if better {
                    best = Some(FormMatch {
                        start: m.start(),
                        end: m.end(),
                        form: form.clone(),
                    });
                }
            }
        }
        best
    }

    /// Relations sharing no phrase with `relation`, so a swap to any of them
    /// changes the meaning.
    pub fn swap_candidates(&self, relation: &str) -> Vec<&str> {
        let own: BTreeSet<&str> = self.forms(relation).into_iter().collect();
        self.entries
            .keys()
            .filter(|r| r.as_str() != relation)
            .filter(|r| self.forms(r).iter().all(|f| !own.contains(f)))
            .map(String::as_str)
            .collect()
    }

    pub fn render(&self, relation: &str, target: &str, anchors: &[&str]) -> Option<String> {
        let entry = self.get(relation)?;
        Some(
            entry
                .template
                .replace("{target}", target)
                .replace("{relation}", &entry.surface_forms[0])
                .replace("{anchor}", &anchors.join(" and the ")),
        )
    }
}

// ---------------------------------------------------------------------------
// record types

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sr3dReference {
    pub scene_id: String,
    pub target_id: ObjectId,
    pub target_category: String,
    pub anchor_ids: Vec<ObjectId>,
    pub relation: String,
    pub surface_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QaRecord {
    pub scene_id: String,
    pub question: String,
    pub answer: String,
    pub related_object_ids: Vec<ObjectId>,
    pub related_categories: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionKind {
    CategoryQa,
    Nr3dCaption,
    Appearance,
    Region,
}

impl CaptionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CaptionKind::CategoryQa => "category_qa",
            CaptionKind::Nr3dCaption => "nr3d_caption",
            CaptionKind::Appearance => "appearance",
            CaptionKind::Region => "region",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub scene_id: String,
    pub object_id: ObjectId,
    pub kind: CaptionKind,
    pub text: String,
}

/// One record that failed validation, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub source: String,
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOutcome<T> {
    pub accepted: Vec<T>,
    pub rejections: Vec<Rejection>,
}

impl<T> Default for LoadOutcome<T> {
    fn default() -> Self {
        Self {
            accepted: Vec::new(),
            rejections: Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// scene files

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    scene_id: String,
    objects: Vec<RawObject>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    id: u32,
    category: String,
    #[serde(rename = "box")]
    bbox: RawBox,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    min: [f64; 3],
    max: [f64; 3],
}

pub fn parse_scene(text: &str, max_objects: usize) -> Result<SceneGraph, String> {
    let raw: RawScene = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mut objects = Vec::with_capacity(raw.objects.len());
    for (i, o) in raw.objects.into_iter().enumerate() {
        let bbox = Aabb3::new(o.bbox.min, o.bbox.max)
            .map_err(|e| format!("objects[{i}].box (id {}): {e}", o.id))?;
        objects.push(ObjectInstance {
            object_id: ObjectId(o.id),
            category: o.category,
            bbox,
        });
    }
    SceneGraph::new(raw.scene_id, objects, max_objects).map_err(|e| e.to_string())
}

pub fn load_scene(path: &Path, max_objects: usize) -> Result<SceneGraph, CorpusError> {
    let bytes = read(path)?;
    parse_scene(&String::from_utf8_lossy(&bytes), max_objects).map_err(|message| {
        CorpusError::Schema {
            path: path.to_path_buf(),
            message,
        }
    })
}

/// Every `*.json` file of a directory, sorted by file name.
pub fn scene_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let rd = fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_scene_dir(dir: &Path, max_objects: usize) -> Result<Vec<SceneGraph>, CorpusError> {
    let mut scenes = scene_files(dir)?
        .iter()
        .map(|p| load_scene(p, max_objects))
        .collect::<Result<Vec<_>, _>>()?;
    scenes.sort_by(|a, b| a.scene_id().cmp(b.scene_id()));
    for w in scenes.windows(2) {
        if w[0].scene_id() == w[1].scene_id() {
            return Err(CorpusError::DuplicateScene(w[0].scene_id().to_string()));
        }
    }
    Ok(scenes)
}

// ---------------------------------------------------------------------------
// JSON-lines corpora

fn parse_lines<T, F>(source: &str, text: &str, mut check: F) -> LoadOutcome<T>
where
    T: serde::de::DeserializeOwned,
    F: FnMut(&mut T) -> Result<(), String>,
{
    let mut out = LoadOutcome::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<T>(line)
            .map_err(|e| e.to_string())
            .and_then(|mut rec| check(&mut rec).map(|_| rec));
        match parsed {
            Ok(rec) => out.accepted.push(rec),
            Err(reason) => out.rejections.push(Rejection {
                source: source.to_string(),
                line: i + 1,
                reason,
            }),
        }
    }
    out
}

fn source_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn parse_sr3d(
    source: &str,
    text: &str,
    lexicon: &RelationLexicon,
) -> LoadOutcome<Sr3dReference> {
    parse_lines(source, text, |r: &mut Sr3dReference| {
        r.relation = canonical_category(&r.relation);
        r.target_category = canonical_category(&r.target_category);
        if r.target_category.is_empty() {
            return Err("missing target category".into());
        }
        if !lexicon.contains(&r.relation) {
            return Err(format!("unknown relation '{}'", r.relation));
        }
        if lexicon.find_form(&r.relation, &r.surface_text).is_none() {
            return Err(format!(
                "surface text does not contain a form of relation '{}'",
                r.relation
            ));
        }
        Ok(())
    })
}

pub fn load_sr3d(
    path: &Path,
    lexicon: &RelationLexicon,
) -> Result<LoadOutcome<Sr3dReference>, CorpusError> {
    let bytes = read(path)?;
    Ok(parse_sr3d(
        &source_name(path),
        &String::from_utf8_lossy(&bytes),
        lexicon,
    ))
}

pub fn parse_qa(source: &str, text: &str) -> LoadOutcome<QaRecord> {
    parse_lines(source, text, |r: &mut QaRecord| {
        if r.question.trim().is_empty() || r.answer.trim().is_empty() {
            return Err("empty question or answer".into());
        }
        if r.related_object_ids.is_empty() {
            return Err("positive record has empty related_object_ids".into());
        }
        r.related_categories = r
            .related_categories
            .iter()
            .map(|c| canonical_category(c))
            .filter(|c| !c.is_empty())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if r.related_categories.is_empty() {
            return Err("positive record has empty related_categories".into());
        }
        Ok(())
    })
}

pub fn load_qa(path: &Path) -> Result<LoadOutcome<QaRecord>, CorpusError> {
    let bytes = read(path)?;
    Ok(parse_qa(&source_name(path), &String::from_utf8_lossy(&bytes)))
}

pub fn parse_captions(source: &str, text: &str) -> LoadOutcome<CaptionRecord> {
    parse_lines(source, text, |r: &mut CaptionRecord| {
        if r.text.trim().is_empty() {
            return Err("empty caption text".into());
        }
        Ok(())
    })
}

pub fn load_captions(path: &Path) -> Result<LoadOutcome<CaptionRecord>, CorpusError> {
    let bytes = read(path)?;
    Ok(parse_captions(
        &source_name(path),
        &String::from_utf8_lossy(&bytes),
    ))
}

// ---------------------------------------------------------------------------
// resolved corpus

/// Scenes plus every record that resolved against them.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub scenes: Vec<SceneGraph>,
    scene_pos: BTreeMap<String, usize>,
    pub refs: Vec<Sr3dReference>,
    pub qa: Vec<QaRecord>,
    pub captions: Vec<CaptionRecord>,
    pub lexicon: RelationLexicon,
    /// Records that failed to parse or referenced something missing.
    pub quarantine: Vec<Rejection>,
}

impl Corpus {
    /// Cross-check records against the scenes; unresolvable records move to
    /// the quarantine list and the rest stay in input order.
    pub fn resolve(
        scenes: Vec<SceneGraph>,
        refs: LoadOutcome<Sr3dReference>,
        qa: LoadOutcome<QaRecord>,
        captions: LoadOutcome<CaptionRecord>,
        lexicon: RelationLexicon,
    ) -> Result<Self, CorpusError> {
        let mut scenes = scenes;
        scenes.sort_by(|a, b| a.scene_id().cmp(b.scene_id()));
        let mut scene_pos = BTreeMap::new();
        for (i, s) in scenes.iter().enumerate() {
            if scene_pos.insert(s.scene_id().to_string(), i).is_some() {
                return Err(CorpusError::DuplicateScene(s.scene_id().to_string()));
            }
        }
        let mut quarantine = Vec::new();
        quarantine.extend(refs.rejections);
        quarantine.extend(qa.rejections);
        quarantine.extend(captions.rejections);

        let lookup = |id: &str| scene_pos.get(id).map(|&i| &scenes[i]);
        let mut q = |source: &str, line: usize, reason: String| {
            quarantine.push(Rejection {
                source: source.to_string(),
                line,
                reason,
            })
        };

        let mut kept_refs = Vec::new();
        for (i, r) in refs.accepted.into_iter().enumerate() {
            let Some(scene) = lookup(&r.scene_id) else {
                q("sr3d", i + 1, format!("unknown scene_id '{}'", r.scene_id));
                continue;
            };
            match scene.object(r.target_id) {
                None => q("sr3d", i + 1, format!("missing target {}", r.target_id.0)),
                Some(o) if o.category != r.target_category => q(
                    "sr3d",
                    i + 1,
                    format!(
                        "target {} is a '{}', record says '{}'",
                        r.target_id.0, o.category, r.target_category
                    ),
                ),
                Some(_) => match r.anchor_ids.iter().find(|a| !scene.contains(**a)) {
                    Some(a) => q("sr3d", i + 1, format!("missing anchor {}", a.0)),
                    None => kept_refs.push(r),
                },
            }
        }

        let mut kept_qa = Vec::new();
        for (i, r) in qa.accepted.into_iter().enumerate() {
            let Some(scene) = lookup(&r.scene_id) else {
                q("qa", i + 1, format!("unknown scene_id '{}'", r.scene_id));
                continue;
            };
            if let Some(id) = r.related_object_ids.iter().find(|id| !scene.contains(**id)) {
                q("qa", i + 1, format!("unresolvable related id {}", id.0));
                continue;
            }
            if let Some(c) = r.related_categories.iter().find(|c| !scene.has_category(c)) {
                q("qa", i + 1, format!("related category '{c}' absent from scene"));
                continue;
            }
            kept_qa.push(r);
        }

        let mut kept_caps = Vec::new();
        for (i, r) in captions.accepted.into_iter().enumerate() {
            match lookup(&r.scene_id) {
                None => q("captions", i + 1, format!("unknown scene_id '{}'", r.scene_id)),
                Some(s) if !s.contains(r.object_id) => {
                    q("captions", i + 1, format!("unresolvable object {}", r.object_id.0))
                }
                Some(_) => kept_caps.push(r),
            }
        }

        Ok(Self {
            scenes,
            scene_pos,
            refs: kept_refs,
            qa: kept_qa,
            captions: kept_caps,
            lexicon,
            quarantine,
        })
    }

    pub fn scene(&self, scene_id: &str) -> Option<&SceneGraph> {
        self.scene_pos.get(scene_id).map(|&i| &self.scenes[i])
    }

    /// Union of categories over all scenes.
    pub fn category_pool(&self) -> BTreeSet<String> {
        self.scenes
            .iter()
            .flat_map(|s| s.categories().map(str::to_string))
            .collect()
    }

    /// Hash of a canonical serialization of the whole corpus.
    pub fn canonical_hash(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.scenes {
            h.update(s.scene_id().as_bytes());
            for o in s.objects() {
                h.update(serde_json::to_vec(o).expect("serializable"));
            }
        }
        for r in &self.refs {
            h.update(serde_json::to_vec(r).expect("serializable"));
        }
        for r in &self.qa {
            h.update(serde_json::to_vec(r).expect("serializable"));
        }
        for r in &self.captions {
            h.update(serde_json::to_vec(r).expect("serializable"));
        }
        hex::encode(h.finalize())
    }
}

/// Locations of the corpus inputs on disk.
#[derive(Debug, Clone, Default)]
pub struct CorpusPaths {
    pub scenes: PathBuf,
    pub sr3d: Option<PathBuf>,
    pub qa: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Load all corpora and return them with content hashes keyed by file name.
pub fn load_corpus(
    paths: &CorpusPaths,
    max_objects: usize,
) -> Result<(Corpus, BTreeMap<String, String>), CorpusError> {
    let mut hashes = BTreeMap::new();
    let mut dir_hash = Sha256::new();
    for f in scene_files(&paths.scenes)? {
        let bytes = read(&f)?;
        dir_hash.update(source_name(&f).as_bytes());
        dir_hash.update([0]);
        dir_hash.update(sha256_hex(&bytes).as_bytes());
    }
    hashes.insert("scenes/".to_string(), hex::encode(dir_hash.finalize()));
    let scenes = load_scene_dir(&paths.scenes, max_objects)?;

    let lexicon = match &paths.lexicon {
        Some(p) => {
            hashes.insert(format!("lexicon:{}", source_name(p)), sha256_hex(&read(p)?));
            RelationLexicon::load(p)?
        }
        None => {
            hashes.insert("lexicon:builtin".into(), sha256_hex(DEFAULT_LEXICON.as_bytes()));
            RelationLexicon::builtin()
        }
    };
    let refs = match &paths.sr3d {
        Some(p) => {
            hashes.insert(format!("sr3d:{}", source_name(p)), sha256_hex(&read(p)?));
            load_sr3d(p, &lexicon)?
        }
        None => LoadOutcome::default(),
    };
    let qa = match &paths.qa {
        Some(p) => {
            hashes.insert(format!("qa:{}", source_name(p)), sha256_hex(&read(p)?));
            load_qa(p)?
        }
        None => LoadOutcome::default(),
    };
    let captions = match &paths.captions {
        Some(p) => {
            hashes.insert(format!("captions:{}", source_name(p)), sha256_hex(&read(p)?));
            load_captions(p)?
        }
        None => LoadOutcome::default(),
    };
    let corpus = Corpus::resolve(scenes, refs, qa, captions, lexicon)?;
    Ok((corpus, hashes))
}
