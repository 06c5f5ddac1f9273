use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Placement, Plan, Primitive, Vocabulary};
use crate::exec::{Action, ROBOT};
use crate::geometry::GraspPoint;
use crate::grounding::GroundedLabelSet;
use crate::text::tokenize;

/// Reserved anchor for doors: resolvable without a grasp point.
pub const DOOR: &str = "door";

const ROBOT_WORDS: &[&str] = &["you", "me", "robot", "yourself", "myself", "us"];
const DETERMINERS: &[&str] = &["the", "a", "an", "this", "that"];

/// What a plan phrase grounded to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum Resolution {
    Instance(String),
    /// A class label with several instances; not actionable on its own.
    Class(String),
    Anchor(String),
    /// Ungrounded phrase, kept verbatim.
    Free(String),
}

impl Resolution {
    pub fn name(&self) -> &str {
        match self {
            Resolution::Instance(n)
            | Resolution::Class(n)
            | Resolution::Anchor(n)
            | Resolution::Free(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "phrase", rename_all = "snake_case")]
pub enum ViolationKind {
    UnresolvedObject(String),
    UnresolvedTarget(String),
    AmbiguousObject(String),
    AmbiguousTarget(String),
    MissingGraspPoint(String),
    FreeTarget(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub step: usize,
    pub severity: Severity,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let (what, phrase) = match &self.kind {
            ViolationKind::UnresolvedObject(p) => ("unresolved object", p),
            ViolationKind::UnresolvedTarget(p) => ("unresolved target", p),
            ViolationKind::AmbiguousObject(p) => ("ambiguous object", p),
            ViolationKind::AmbiguousTarget(p) => ("ambiguous target", p),
            ViolationKind::MissingGraspPoint(p) => ("no grasp point for", p),
            ViolationKind::FreeTarget(p) => ("free-phrase target", p),
        };
        write!(f, "step {}: {what}: {phrase}", self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedStep {
    pub primitive: Primitive,
    pub object: Option<Resolution>,
    pub target: Option<Resolution>,
    pub placement: Placement,
}

impl ResolvedStep {
    pub fn to_action(&self) -> Action {
        Action {
            primitive: self.primitive,
            object: self.object.as_ref().map(|r| r.name().to_string()),
            target: self.target.as_ref().map(|r| r.name().to_string()),
            placement: self.placement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanValidation {
    pub steps: Vec<ResolvedStep>,
    pub violations: Vec<Violation>,
}

impl PlanValidation {
    /// No hard violations.
    pub fn is_valid(&self) -> bool {
        self.violations.iter().all(|v| v.severity == Severity::Soft)
    }

    pub fn actions(&self) -> Vec<Action> {
        self.steps.iter().map(ResolvedStep::to_action).collect()
    }

    /// Audit record pairing each parsed step with its resolution.
    pub fn audit(&self, plan: &Plan) -> PlanAudit {
        PlanAudit {
            steps: plan
                .steps
                .iter()
                .zip(&self.steps)
                .map(|(s, r)| AuditStep {
                    primitive: s.primitive,
                    object: s.object.clone(),
                    target: s.target.clone(),
                    preposition: s.preposition.clone(),
                    resolved_object: r.object.clone(),
                    resolved_target: r.target.clone(),
                })
                .collect(),
            violations: self.violations.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditStep {
    pub primitive: Primitive,
    pub object: Option<String>,
    pub target: Option<String>,
    pub preposition: Option<String>,
    pub resolved_object: Option<Resolution>,
    pub resolved_target: Option<Resolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanAudit {
    pub steps: Vec<AuditStep>,
    pub violations: Vec<Violation>,
}

struct Candidate {
    tokens: Vec<String>,
    resolution: Resolution,
    rank: u8,
}

fn candidates(labels: &GroundedLabelSet) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (phrase, name) in &labels.aliases {
        out.push(Candidate {
            tokens: tokenize(phrase),
            resolution: Resolution::Instance(name.clone()),
            rank: 0,
        });
    }
    for name in labels.instance_names.keys() {
        out.push(Candidate {
            tokens: tokenize(name),
            resolution: Resolution::Instance(name.clone()),
            rank: 0,
        });
    }
    for class in &labels.classes {
        let instances = labels.instances_of(class);
        let resolution = match instances.as_slice() {
            [only] => Resolution::Instance(only.to_string()),
            _ => Resolution::Class(class.clone()),
        };
        out.push(Candidate {
            tokens: tokenize(class),
            resolution,
            rank: 1,
        });
    }
    out
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Greedy longest match of a phrase against instance aliases, instance
/// names and class labels, then the reserved anchors.
fn resolve(phrase: &str, table: &[Candidate]) -> Option<Resolution> {
    let mut tokens = tokenize(phrase);
    while tokens
        .first()
        .is_some_and(|t| DETERMINERS.contains(&t.as_str()))
    {
        tokens.remove(0);
    }
    let best = table
        .iter()
        .filter(|c| contains_run(&tokens, &c.tokens))
        .max_by(|a, b| {
            a.tokens
                .len()
                .cmp(&b.tokens.len())
                .then(b.rank.cmp(&a.rank))
                .then_with(|| b.resolution.name().cmp(a.resolution.name()))
        });
    if let Some(c) = best {
        return Some(c.resolution.clone());
    }
    if tokens.iter().any(|t| ROBOT_WORDS.contains(&t.as_str())) {
        return Some(Resolution::Anchor(ROBOT.to_string()));
    }
    if tokens.iter().any(|t| t == DOOR) {
        return Some(Resolution::Anchor(DOOR.to_string()));
    }
    None
}

/// Grounds every step of a parsed plan and collects violations (never
/// fails fast). The plan itself is not modified.
pub fn validate_plan(
    plan: &Plan,
    labels: &GroundedLabelSet,
    grasp_points: &BTreeMap<String, GraspPoint>,
    vocabulary: &Vocabulary,
) -> PlanValidation {
    let table = candidates(labels);
    let mut steps = Vec::with_capacity(plan.steps.len());
    let mut violations = Vec::new();
    for (i, step) in plan.steps.iter().enumerate() {
        let mut flag = |severity, kind| {
            violations.push(Violation {
                step: i,
                severity,
                kind,
            })
        };

        let object = step
            .object
            .as_deref()
            .map(|phrase| match resolve(phrase, &table) {
                Some(Resolution::Anchor(a)) if a == ROBOT => {
                    flag(
                        Severity::Hard,
                        ViolationKind::UnresolvedObject(phrase.to_string()),
                    );
                    Resolution::Free(phrase.to_string())
                }
                Some(r @ Resolution::Class(_)) => {
                    flag(
                        Severity::Hard,
                        ViolationKind::AmbiguousObject(phrase.to_string()),
                    );
                    r
                }
                Some(r) => r,
                None => {
                    flag(
                        Severity::Hard,
                        ViolationKind::UnresolvedObject(phrase.to_string()),
                    );
                    Resolution::Free(phrase.to_string())
                }
            });
        if matches!(
            step.primitive,
            Primitive::Grab | Primitive::Pull | Primitive::Push
        ) {
            if let Some(Resolution::Instance(name)) = &object {
                if name != DOOR && !grasp_points.contains_key(name) {
                    flag(
                        Severity::Hard,
                        ViolationKind::MissingGraspPoint(name.clone()),
                    );
                }
            }
        }

        let soft_target = matches!(step.primitive, Primitive::Push | Primitive::Pull);
        let target = step
            .target
            .as_deref()
            .map(|phrase| match resolve(phrase, &table) {
                Some(r @ Resolution::Class(_)) => {
                    let severity = if soft_target {
                        Severity::Soft
                    } else {
                        Severity::Hard
                    };
                    flag(severity, ViolationKind::AmbiguousTarget(phrase.to_string()));
                    r
                }
                Some(r) => r,
                None => {
                    if soft_target || step.primitive == Primitive::Grab {
                        flag(
                            Severity::Soft,
                            ViolationKind::FreeTarget(phrase.to_string()),
                        );
                    } else {
                        flag(
                            Severity::Hard,
                            ViolationKind::UnresolvedTarget(phrase.to_string()),
                        );
                    }
                    Resolution::Free(phrase.to_string())
                }
            });

        let placement = step
            .preposition
            .as_deref()
            .and_then(|p| vocabulary.connective(p))
            .map(|c| c.placement)
            .unwrap_or_default();
        steps.push(ResolvedStep {
            primitive: step.primitive,
            object,
            target,
            placement,
        });
    }
    PlanValidation { steps, violations }
}
