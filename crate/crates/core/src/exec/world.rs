use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Region;
use crate::scene::SceneFixture;
use crate::text::fold;

/// Reserved name for the robot itself (and the camera origin).
pub const ROBOT: &str = "robot";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub position: [f64; 3],
    pub container: Option<String>,
    pub held: bool,
    pub fixed: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub position: [f64; 3],
    pub holding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvariantViolation {
    #[error("robot holds `{0}` but the object is not marked held")]
    HoldingMismatch(String),
    #[error("object `{0}` is marked held but the robot is not holding it")]
    StrayHeld(String),
    #[error("object `{0}` is both held and inside a container")]
    HeldAndContained(String),
    #[error("object `{0}` sits in unknown container `{1}`")]
    UnknownContainer(String, String),
    #[error("object `{0}` contains itself")]
    SelfContained(String),
}

/// Simulated world: object poses, containment and the robot gripper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub objects: BTreeMap<String, ObjectState>,
    pub robot: RobotState,
    #[serde(skip)]
    pub regions: BTreeMap<String, Region>,
    #[serde(skip)]
    pub push_mm: f64,
    #[serde(skip)]
    pub pull_mm: f64,
}

impl WorldState {
    /// Initial world of a fixture: every ground-truth object at its
    /// centroid, the robot at the camera origin with an empty gripper.
    pub fn from_fixture(fixture: &SceneFixture) -> Self {
        let objects = fixture
            .objects
            .iter()
            .flatten()
            .map(|o| {
                (
                    o.name.clone(),
                    ObjectState {
                        position: o.centroid_mm,
                        container: o.container.clone(),
                        held: false,
                        fixed: o.fixed,
                        attributes: o.attributes.clone(),
                    },
                )
            })
            .collect();
        Self {
            objects,
            robot: RobotState {
                position: [0.0; 3],
                holding: None,
            },
            regions: fixture.regions.clone(),
            push_mm: fixture.push_mm,
            pull_mm: fixture.pull_mm,
        }
    }

    fn key(&self, name: &str) -> Option<String> {
        if self.objects.contains_key(name) {
            return Some(name.to_string());
        }
        let folded = fold(name);
        self.objects.keys().find(|k| fold(k) == folded).cloned()
    }

    pub fn object(&self, name: &str) -> Option<&ObjectState> {
        self.key(name).and_then(|k| self.objects.get(&k))
    }

    pub(crate) fn object_mut(&mut self, name: &str) -> Option<(String, &mut ObjectState)> {
        let k = self.key(name)?;
        let o = self.objects.get_mut(&k)?;
        Some((k, o))
    }

    /// Position of an object, a region center, or the robot.
    pub fn position_of(&self, name: &str) -> Option<[f64; 3]> {
        if fold(name) == ROBOT {
            return Some(self.robot.position);
        }
        if let Some(o) = self.object(name) {
            return Some(o.position);
        }
        self.regions.get(name).map(|r| r.center)
    }

    pub fn check_invariants(&self) -> Result<(), InvariantViolation> {
        if let Some(h) = &self.robot.holding {
            if !self.objects.get(h).is_some_and(|o| o.held) {
                return Err(InvariantViolation::HoldingMismatch(h.clone()));
            }
        }
        for (name, o) in &self.objects {
            if o.held && self.robot.holding.as_deref() != Some(name.as_str()) {
                return Err(InvariantViolation::StrayHeld(name.clone()));
            }
            if let Some(c) = &o.container {
                if o.held {
                    return Err(InvariantViolation::HeldAndContained(name.clone()));
                }
                if c == name {
                    return Err(InvariantViolation::SelfContained(name.clone()));
                }
                if !self.objects.contains_key(c) {
                    return Err(InvariantViolation::UnknownContainer(
                        name.clone(),
                        c.clone(),
                    ));
                }
            }
        }
        Ok(())
    }
}
