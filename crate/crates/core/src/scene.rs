//! Scenes, object instances and axis-aligned box geometry.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default upper bound on object slots per scene.
pub const DEFAULT_MAX_OBJECTS: usize = 150;

/// Index `i` of the object token `<OBJi>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl ObjectId {
    /// Canonical token form, zero-padded to three digits: `<OBJ007>`.
    pub fn token(self) -> String {
        format!("<OBJ{:03}>", self.0)
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<OBJ{:03}>", self.0)
    }
}

impl From<u32> for ObjectId {
    fn from(v: u32) -> Self {
        ObjectId(v)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("box min {min:?} exceeds max {max:?}")]
    InvertedBox { min: [f64; 3], max: [f64; 3] },
    #[error("box has a non-finite coordinate")]
    NonFiniteBox,
    #[error("duplicate object id {0}")]
    DuplicateId(u32),
    #[error("object id {id} outside 0..{max}")]
    IdOutOfRange { id: u32, max: usize },
    #[error("object {0} has an empty category")]
    EmptyCategory(u32),
    #[error("scene {scene} has {count} objects, limit is {max}")]
    TooManyObjects { scene: String, count: usize, max: usize },
    #[error("unknown object id {0}")]
    UnknownObject(u32),
}

/// Axis-aligned box in scene coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb3 {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb3 {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self, SceneError> {
        if min.iter().chain(max.iter()).any(|v| !v.is_finite()) {
            return Err(SceneError::NonFiniteBox);
        }
        if (0..3).any(|k| min[k] > max[k]) {
            return Err(SceneError::InvertedBox { min, max });
        }
        Ok(Self { min, max })
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|k| self.max[k] - self.min[k]).product()
    }

    pub fn translated(&self, by: [f64; 3]) -> Self {
        Self {
            min: [self.min[0] + by[0], self.min[1] + by[1], self.min[2] + by[2]],
            max: [self.max[0] + by[0], self.max[1] + by[1], self.max[2] + by[2]],
        }
    }

    pub fn intersection_volume(&self, other: &Aabb3) -> f64 {
        (0..3)
            .map(|k| {
                let lo = self.min[k].max(other.min[k]);
                let hi = self.max[k].min(other.max[k]);
                (hi - lo).max(0.0)
            })
            .product()
    }
}

/// Intersection over union of two boxes.
///
/// Returns 0 for disjoint boxes and whenever the union has zero volume.
pub fn iou(a: &Aabb3, b: &Aabb3) -> f64 {
    let inter = a.intersection_volume(b);
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Lowercase, trim and collapse internal whitespace.
pub fn canonical_category(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub object_id: ObjectId,
    pub category: String,
    pub bbox: Aabb3,
}

/// A 3D scene with its objects and a category index.
///
/// Objects keep their input order; the category index lists ids in
/// ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    scene_id: String,
    objects: Vec<ObjectInstance>,
    by_id: BTreeMap<ObjectId, usize>,
    category_index: BTreeMap<String, Vec<ObjectId>>,
}

impl SceneGraph {
    pub fn new(
        scene_id: impl Into<String>,
        objects: Vec<ObjectInstance>,
        max_objects: usize,
    ) -> Result<Self, SceneError> {
        let scene_id = scene_id.into();
        if objects.len() > max_objects {
            return Err(SceneError::TooManyObjects {
                scene: scene_id,
                count: objects.len(),
                max: max_objects,
            });
        }
        let mut by_id = BTreeMap::new();
        let mut category_index: BTreeMap<String, Vec<ObjectId>> = BTreeMap::new();
        let mut objects = objects;
        for (pos, obj) in objects.iter_mut().enumerate() {
            if obj.object_id.0 as usize >= max_objects {
                return Err(SceneError::IdOutOfRange {
                    id: obj.object_id.0,
                    max: max_objects,
                });
            }
            obj.category = canonical_category(&obj.category);
            if obj.category.is_empty() {
                return Err(SceneError::EmptyCategory(obj.object_id.0));
            }
            Aabb3::new(obj.bbox.min, obj.bbox.max)?;
            if by_id.insert(obj.object_id, pos).is_some() {
                return Err(SceneError::DuplicateId(obj.object_id.0));
            }
            category_index
                .entry(obj.category.clone())
                .or_default()
                .push(obj.object_id);
        }
        for ids in category_index.values_mut() {
            ids.sort();
        }
        Ok(Self {
            scene_id,
            objects,
            by_id,
            category_index,
        })
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn objects(&self) -> &[ObjectInstance] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectInstance> {
        self.by_id.get(&id).map(|&pos| &self.objects[pos])
    }

    pub fn contains(&self, id: ObjectId) -> bool {
        self.by_id.contains_key(&id)
    }

    /// Distinct categories, sorted.
    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.category_index.keys().map(String::as_str)
    }

    pub fn has_category(&self, category: &str) -> bool {
        self.category_index.contains_key(&canonical_category(category))
    }

    pub fn category_index(&self) -> &BTreeMap<String, Vec<ObjectId>> {
        &self.category_index
    }

    /// All ids of the given category in ascending order.
    pub fn instances_of(&self, category: &str) -> Vec<ObjectId> {
        self.category_index
            .get(&canonical_category(category))
            .cloned()
            .unwrap_or_default()
    }

    /// True iff another object shares the target's category.
    pub fn has_distractors(&self, target: ObjectId) -> Result<bool, SceneError> {
        let obj = self
            .object(target)
            .ok_or(SceneError::UnknownObject(target.0))?;
        Ok(self.category_index[&obj.category].len() > 1)
    }
}
