//! Plan DSL: raw planner text → primitive steps → grounded, validated steps.

mod parse;
mod validate;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{normalize_verb, parse_plan, PlanParser};
pub use validate::{
    validate_plan, AuditStep, PlanAudit, PlanValidation, Resolution, ResolvedStep, Severity,
    Violation, ViolationKind, DOOR,
};

use crate::exec::SIDE_OFFSET_MM;

const SHIPPED_SYNONYMS: &str = include_str!("../../assets/plan/synonyms.txt");
const SHIPPED_CONNECTIVES: &str = include_str!("../../assets/plan/connectives.txt");

/// Minimum embedding similarity for mapping an unknown verb.
pub const DEFAULT_VERB_THRESHOLD: f64 = 0.5;

/// The five executable primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Primitive {
    Navigate,
    Grab,
    Drop,
    Pull,
    Push,
}

impl Primitive {
    pub const ALL: [Primitive; 5] = [
        Primitive::Navigate,
        Primitive::Grab,
        Primitive::Drop,
        Primitive::Pull,
        Primitive::Push,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Navigate => "NAVIGATE",
            Primitive::Grab => "GRAB",
            Primitive::Drop => "DROP",
            Primitive::Pull => "PULL",
            Primitive::Push => "PUSH",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(name.trim()))
    }

    pub fn needs_object(self) -> bool {
        !matches!(self, Primitive::Navigate)
    }

    pub fn needs_target(self) -> bool {
        matches!(self, Primitive::Drop | Primitive::Navigate)
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a dropped object ends up relative to its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    #[default]
    Inside,
    Right,
    Left,
    Near,
    Away,
    Below,
    Above,
}

impl Placement {
    fn parse(s: &str) -> Option<Self> {
        Some(match s.trim() {
            "inside" => Placement::Inside,
            "right" => Placement::Right,
            "left" => Placement::Left,
            "near" => Placement::Near,
            "away" => Placement::Away,
            "below" => Placement::Below,
            "above" => Placement::Above,
            _ => return None,
        })
    }

    /// Resting position for an object placed relative to `anchor`
    /// (camera frame: x right, y down, z forward).
    pub fn offset(self, anchor: [f64; 3]) -> [f64; 3] {
        let [x, y, z] = anchor;
        match self {
            Placement::Inside => anchor,
            Placement::Right => [x + SIDE_OFFSET_MM, y, z],
            Placement::Left => [x - SIDE_OFFSET_MM, y, z],
            Placement::Near => [x + SIDE_OFFSET_MM / 2.0, y, z],
            Placement::Away => [x, y, z + SIDE_OFFSET_MM],
            Placement::Below => [x, y + SIDE_OFFSET_MM, z],
            Placement::Above => [x, y - SIDE_OFFSET_MM, z],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connective {
    /// Lowercase words of the connective.
    pub words: Vec<String>,
    pub placement: Placement,
    /// The connective stays at the front of the target phrase.
    pub keep: bool,
}

impl Connective {
    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabularyError {
    #[error("synonym line {0}: expected `phrase = PRIMITIVE`")]
    Synonym(usize),
    #[error("connective line {0}: expected `words | placement [| keep]`")]
    Connective(usize),
}

/// Verb synonym table and connective list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    synonyms: BTreeMap<String, Primitive>,
    connectives: Vec<Connective>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::parse(SHIPPED_SYNONYMS, SHIPPED_CONNECTIVES)
            .expect("bundled vocabulary is well-formed")
    }
}

impl Vocabulary {
    pub fn parse(synonyms: &str, connectives: &str) -> Result<Self, VocabularyError> {
        Ok(Self {
            synonyms: parse_synonyms(synonyms)?,
            connectives: parse_connectives(connectives)?,
        })
    }

    /// Replaces the synonym table; the five primitive names always map to
    /// themselves.
    pub fn with_synonyms(mut self, text: &str) -> Result<Self, VocabularyError> {
        self.synonyms = parse_synonyms(text)?;
        Ok(self)
    }

    pub fn with_connectives(mut self, text: &str) -> Result<Self, VocabularyError> {
        self.connectives = parse_connectives(text)?;
        Ok(self)
    }

    pub fn synonym(&self, phrase: &str) -> Option<Primitive> {
        self.synonyms.get(phrase).copied()
    }

    /// Connectives, longest first.
    pub fn connectives(&self) -> &[Connective] {
        &self.connectives
    }

    pub fn connective(&self, text: &str) -> Option<&Connective> {
        self.connectives.iter().find(|c| c.text() == text)
    }

    fn max_synonym_words(&self) -> usize {
        self.synonyms
            .keys()
            .map(|k| k.split(' ').count())
            .max()
            .unwrap_or(1)
    }
}

fn parse_synonyms(text: &str) -> Result<BTreeMap<String, Primitive>, VocabularyError> {
    let mut map: BTreeMap<String, Primitive> = Primitive::ALL
        .iter()
        .map(|p| (p.name().to_lowercase(), *p))
        .collect();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (phrase, prim) = line
            .split_once('=')
            .ok_or(VocabularyError::Synonym(i + 1))?;
        let prim = Primitive::from_name(prim).ok_or(VocabularyError::Synonym(i + 1))?;
        let phrase = crate::text::fold(phrase);
        if phrase.is_empty() {
            return Err(VocabularyError::Synonym(i + 1));
        }
        map.insert(phrase, prim);
    }
    Ok(map)
}

fn parse_connectives(text: &str) -> Result<Vec<Connective>, VocabularyError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('|').map(str::trim).collect();
        let (words, placement, keep) = match parts[..] {
            [w, p] => (w, p, false),
            [w, p, "keep"] => (w, p, true),
            _ => return Err(VocabularyError::Connective(i + 1)),
        };
        let placement = Placement::parse(placement).ok_or(VocabularyError::Connective(i + 1))?;
        let words: Vec<String> = crate::text::fold(words)
            .split(' ')
            .map(ToString::to_string)
            .collect();
        if words.iter().any(String::is_empty) {
            return Err(VocabularyError::Connective(i + 1));
        }
        out.push(Connective {
            words,
            placement,
            keep,
        });
    }
    out.sort_by_key(|c| core::cmp::Reverse(c.words.len()));
    Ok(out)
}

/// One parsed step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub primitive: Primitive,
    pub object: Option<String>,
    pub target: Option<String>,
    pub preposition: Option<String>,
    pub raw: String,
}

impl PlanStep {
    /// Canonical text form: `VERB object [preposition] target`.
    pub fn render(&self) -> String {
        let mut parts: Vec<&str> = alloc::vec![self.primitive.name()];
        if let Some(o) = &self.object {
            parts.push(o);
        }
        if let Some(p) = &self.preposition {
            parts.push(p);
        }
        if let Some(t) = &self.target {
            parts.push(t);
        }
        parts.join(" ")
    }
}

/// Ordered, non-empty list of steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub source: String,
}

impl Plan {
    pub fn render(&self) -> String {
        self.steps
            .iter()
            .map(PlanStep::render)
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn primitives(&self) -> Vec<Primitive> {
        self.steps.iter().map(|s| s.primitive).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanError {
    #[error("plan text is empty")]
    Empty,
    #[error("step {step}: unmappable action `{verb}`")]
    Unmappable { step: usize, verb: String },
    #[error("step {step}: {primitive} is missing its {missing}")]
    Arity {
        step: usize,
        primitive: Primitive,
        missing: String,
    },
}
