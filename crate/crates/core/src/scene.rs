//! Scene model: triples, scene graphs, camera frames and scene fixtures.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{GoalAtom, Region};
use crate::mask::Rle;
use crate::text::fold;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("triple {0} is empty")]
    EmptyTripleField(&'static str),
    #[error("invalid intrinsics: {0}")]
    Intrinsics(String),
    #[error("depth has {actual} samples, expected {expected} ({width}x{height})")]
    DepthLength {
        expected: usize,
        actual: usize,
        width: u32,
        height: u32,
    },
    #[error("task description is empty")]
    EmptyTask,
    #[error("object `{name}`: {reason}")]
    Object { name: String, reason: String },
    #[error("goal references undeclared name `{0}`")]
    UndeclaredGoalName(String),
}

/// A `head | relation | tail` statement about two scene objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTriple")]
pub struct Triple {
    head: String,
    relation: String,
    tail: String,
}

#[derive(Deserialize)]
struct RawTriple {
    head: String,
    relation: String,
    tail: String,
}

impl TryFrom<RawTriple> for Triple {
    type Error = SceneError;

    fn try_from(raw: RawTriple) -> Result<Self, Self::Error> {
        Triple::new(&raw.head, &raw.relation, &raw.tail)
    }
}

impl Triple {
    /// Builds a triple, trimming each part. All three parts must be non-empty.
    pub fn new(head: &str, relation: &str, tail: &str) -> Result<Self, SceneError> {
        let (head, relation, tail) = (head.trim(), relation.trim(), tail.trim());
        if head.is_empty() {
            return Err(SceneError::EmptyTripleField("head"));
        }
        if relation.is_empty() {
            return Err(SceneError::EmptyTripleField("relation"));
        }
        if tail.is_empty() {
            return Err(SceneError::EmptyTripleField("tail"));
        }
        Ok(Self {
            head: head.to_string(),
            relation: relation.to_string(),
            tail: tail.to_string(),
        })
    }

    pub fn head(&self) -> &str {
        &self.head
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn tail(&self) -> &str {
        &self.tail
    }

    fn folded_key(&self) -> (String, String, String) {
        (fold(&self.head), fold(&self.relation), fold(&self.tail))
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} | {} | {}", self.head, self.relation, self.tail)
    }
}

/// Ordered set of triples describing one frame. Duplicates (after
/// case-folding) are rejected on insert.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SceneGraph {
    triples: Vec<Triple>,
    source_image_digest: String,
}

impl SceneGraph {
    pub fn new(source_image_digest: impl Into<String>) -> Self {
        Self {
            triples: Vec::new(),
            source_image_digest: source_image_digest.into(),
        }
    }

    /// Inserts a triple unless an equal one (case-folded) is present.
    /// Returns whether the graph changed.
    pub fn insert(&mut self, triple: Triple) -> bool {
        let key = triple.folded_key();
        if self.triples.iter().any(|t| t.folded_key() == key) {
            return false;
        }
        self.triples.push(triple);
        true
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn source_image_digest(&self) -> &str {
        &self.source_image_digest
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Distinct object phrases (heads and tails) in order of first
    /// appearance, keeping the casing of the first occurrence.
    pub fn object_phrases(&self) -> Vec<&str> {
        let mut seen: Vec<String> = Vec::new();
        let mut out = Vec::new();
        for t in &self.triples {
            for phrase in [t.head(), t.tail()] {
                let key = fold(phrase);
                if !seen.contains(&key) {
                    seen.push(key);
                    out.push(phrase);
                }
            }
        }
        out
    }

    /// Renders the graph in the `head | relation | tail` line format.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            out.push_str(&t.to_string());
            out.push('\n');
        }
        out
    }
}

impl Extend<Triple> for SceneGraph {
    fn extend<I: IntoIterator<Item = Triple>>(&mut self, iter: I) {
        for t in iter {
            self.insert(t);
        }
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, SceneError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |msg: &str| Err(SceneError::Intrinsics(msg.to_string()));
        if !(self.fx.is_finite() && self.fx > 0.0) || !(self.fy.is_finite() && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("resolution must be non-zero");
        }
        if !(self.cx >= 0.0 && self.cx < f64::from(self.width)) {
            return bad("cx must lie in [0, width)");
        }
        if !(self.cy >= 0.0 && self.cy < f64::from(self.height)) {
            return bad("cy must lie in [0, height)");
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// One RGB-D capture. RGB content is carried only as a digest; depth is
/// row-major millimeters with 0 meaning "no return".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgbdFrame {
    rgb_digest: String,
    depth: Vec<u16>,
    intrinsics: CameraIntrinsics,
}

impl RgbdFrame {
    pub fn new(
        rgb_digest: impl Into<String>,
        depth: Vec<u16>,
        intrinsics: CameraIntrinsics,
    ) -> Result<Self, SceneError> {
        intrinsics.validate()?;
        let expected = intrinsics.pixel_count();
        if depth.len() != expected {
            return Err(SceneError::DepthLength {
                expected,
                actual: depth.len(),
                width: intrinsics.width,
                height: intrinsics.height,
            });
        }
        Ok(Self {
            rgb_digest: rgb_digest.into(),
            depth,
            intrinsics,
        })
    }

    pub fn rgb_digest(&self) -> &str {
        &self.rgb_digest
    }

    pub fn depth(&self) -> &[u16] {
        &self.depth
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    /// Depth at pixel `(u, v)` in millimeters.
    pub fn depth_at(&self, u: u32, v: u32) -> u16 {
        self.depth[v as usize * self.intrinsics.width as usize + u as usize]
    }
}

/// Natural-language goal statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDescription(String);

impl TaskDescription {
    pub fn new(text: impl Into<String>) -> Result<Self, SceneError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(SceneError::EmptyTask);
        }
        Ok(Self(text.trim().to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ground-truth object carried by a scene fixture. Drives the simulated
/// perception backend and the initial state of the simulated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    pub class: String,
    /// `[u0, v0, u1, v1]`, half-open.
    pub bbox: [u32; 4],
    pub mask: Rle,
    pub centroid_mm: [f64; 3],
    pub score: f64,
    /// Not graspable (shelves, bins bolted down, doors).
    pub fixed: bool,
    /// Instance this object initially sits in.
    pub container: Option<String>,
    pub attributes: BTreeMap<String, f64>,
}

/// A validated scene fixture: a frame plus the optional ground truth,
/// goal and world parameters used by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFixture {
    pub frame: RgbdFrame,
    pub objects: Option<Vec<SceneObject>>,
    pub goal: Vec<GoalAtom>,
    pub regions: BTreeMap<String, Region>,
    pub push_mm: f64,
    pub pull_mm: f64,
}

pub const DEFAULT_DISPLACEMENT_MM: f64 = 300.0;

impl SceneFixture {
    /// Checks every ground-truth object against the frame and every goal
    /// atom against the declared names.
    pub fn validate(&self) -> Result<(), SceneError> {
        let (w, h) = (self.frame.width(), self.frame.height());
        let objects = self.objects.as_deref().unwrap_or(&[]);
        for (i, o) in objects.iter().enumerate() {
            let err = |reason: &str| SceneError::Object {
                name: o.name.clone(),
                reason: reason.to_string(),
            };
            if o.name.trim().is_empty() || o.class.trim().is_empty() {
                return Err(err("name and class must be non-empty"));
            }
            if objects[..i].iter().any(|p| fold(&p.name) == fold(&o.name)) {
                return Err(err("duplicate object name"));
            }
            let [u0, v0, u1, v1] = o.bbox;
            if !(u0 < u1 && u1 <= w && v0 < v1 && v1 <= h) {
                return Err(err("bbox outside frame or empty"));
            }
            if !(0.0..=1.0).contains(&o.score) {
                return Err(err("score outside [0, 1]"));
            }
            if o.mask.width() != w || o.mask.height() != h {
                return Err(err("mask dimensions differ from frame"));
            }
            if o.mask.count_ones() == 0 {
                return Err(err("mask is empty"));
            }
            if !o.mask.within_box(o.bbox) {
                return Err(err("mask has foreground outside its bbox"));
            }
        }
        for o in objects {
            if let Some(c) = &o.container {
                if !objects.iter().any(|p| fold(&p.name) == fold(c)) {
                    return Err(SceneError::Object {
                        name: o.name.clone(),
                        reason: alloc::format!("container `{c}` is not a declared object"),
                    });
                }
            }
        }
        for atom in &self.goal {
            for name in atom.referenced_names() {
                let known = name == "robot"
                    || objects.iter().any(|o| fold(&o.name) == fold(name))
                    || self.regions.contains_key(name);
                if !known {
                    return Err(SceneError::UndeclaredGoalName(name.to_string()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: &str, r: &str, tl: &str) -> Triple {
        Triple::new(h, r, tl).unwrap()
    }

    #[test]
    fn triple_rejects_blank_parts() {
        assert_eq!(
            Triple::new("  ", "on", "table"),
            Err(SceneError::EmptyTripleField("head"))
        );
        assert_eq!(
            Triple::new("cup", "", "table"),
            Err(SceneError::EmptyTripleField("relation"))
        );
        assert_eq!(
            Triple::new("cup", "on", " \t"),
            Err(SceneError::EmptyTripleField("tail"))
        );
        assert_eq!(t(" cup ", "on", "table").head(), "cup");
    }

    #[test]
    fn graph_dedup_is_case_folded_and_idempotent() {
        let mut g = SceneGraph::new("d");
        assert!(g.insert(t("Cup", "on", "Table")));
        assert!(!g.insert(t("cup", "ON", "table")));
        let before = g.clone();
        assert!(!g.insert(t("cup", "on", "table")));
        assert_eq!(g, before);
        assert_eq!(g.triples()[0].head(), "Cup");
    }

    #[test]
    fn object_phrases_in_appearance_order() {
        let mut g = SceneGraph::new("d");
        g.insert(t("crumpled paper", "left of", "can"));
        g.insert(t("Can", "in front of", "bin"));
        assert_eq!(g.object_phrases(), ["crumpled paper", "can", "bin"]);
    }

    #[test]
    fn intrinsics_invariants() {
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 2, 2).is_ok());
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 2, 2).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 2.0, 0.0, 2, 2).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, -0.5, 2, 2).is_err());
    }

    #[test]
    fn frame_checks_depth_length() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 2, 2).unwrap();
        assert!(RgbdFrame::new("x", alloc::vec![0; 4], k).is_ok());
        assert!(matches!(
            RgbdFrame::new("x", alloc::vec![0; 3], k),
            Err(SceneError::DepthLength {
                expected: 4,
                actual: 3,
                ..
            })
        ));
    }

    #[test]
    fn empty_task_rejected() {
        assert_eq!(TaskDescription::new("  "), Err(SceneError::EmptyTask));
    }
}
