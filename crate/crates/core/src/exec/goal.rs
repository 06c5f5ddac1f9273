//! Goal predicates over a [`WorldState`].

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::WorldState;
use crate::scene::SceneObject;

/// Spherical region of the world, millimeters in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: [f64; 3],
    pub radius: f64,
}

/// Image axis used by ordering atoms: `u` is camera x, `v` camera y, `z`
/// depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    U,
    V,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::U => 0,
            Axis::V => 1,
            Axis::Z => 2,
        }
    }
}

/// One conjunct of a goal. A goal is the conjunction of its atoms; the
/// empty conjunction always holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalAtom {
    /// Object sits in (or on) a container instance.
    In(String, String),
    /// First object has smaller camera x than the second.
    LeftOf(String, String),
    /// Object (or `robot`) lies within a named region.
    At(String, String),
    /// Objects carrying the attribute, from largest to smallest value, have
    /// strictly increasing coordinates along the axis.
    OrderedBy(String, Axis),
    /// Exactly this many objects sit in the container.
    Count(String, u32),
}

impl GoalAtom {
    /// Instance, region or anchor names the atom refers to.
    pub fn referenced_names(&self) -> Vec<&str> {
        match self {
            GoalAtom::In(a, b) | GoalAtom::LeftOf(a, b) | GoalAtom::At(a, b) => alloc::vec![a, b],
            GoalAtom::Count(c, _) => alloc::vec![c],
            GoalAtom::OrderedBy(..) => Vec::new(),
        }
    }

    pub fn holds(&self, world: &WorldState) -> bool {
        match self {
            GoalAtom::In(obj, container) => world
                .object(obj)
                .is_some_and(|o| o.container.as_deref() == Some(container.as_str())),
            GoalAtom::LeftOf(a, b) => match (world.object(a), world.object(b)) {
                (Some(a), Some(b)) => a.position[0] < b.position[0],
                _ => false,
            },
            GoalAtom::At(obj, region) => {
                let Some(r) = world.regions.get(region) else {
                    return false;
                };
                let Some(p) = world.position_of(obj) else {
                    return false;
                };
                let d2: f64 = (0..3)
                    .map(|i| (p[i] - r.center[i]) * (p[i] - r.center[i]))
                    .sum();
                d2 <= r.radius * r.radius
            }
            GoalAtom::OrderedBy(attribute, axis) => {
                let mut ranked: Vec<(f64, f64)> = world
                    .objects
                    .values()
                    .filter_map(|o| {
                        o.attributes
                            .get(attribute)
                            .map(|v| (*v, o.position[axis.index()]))
                    })
                    .collect();
                ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
                ranked.windows(2).all(|w| w[0].1 < w[1].1)
            }
            GoalAtom::Count(container, n) => {
                world
                    .objects
                    .values()
                    .filter(|o| o.container.as_deref() == Some(container.as_str()))
                    .count()
                    == *n as usize
            }
        }
    }
}

/// Conjunction of atoms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoalPredicate {
    pub atoms: Vec<GoalAtom>,
}

impl GoalPredicate {
    pub fn new(atoms: Vec<GoalAtom>) -> Self {
        Self { atoms }
    }

    pub fn holds(&self, world: &WorldState) -> bool {
        self.atoms.iter().all(|a| a.holds(world))
    }

    /// Checks that every referenced name is an object, region or `robot`.
    pub fn undeclared_names<'a>(
        &'a self,
        objects: &[SceneObject],
        world: &WorldState,
    ) -> Vec<&'a str> {
        self.atoms
            .iter()
            .flat_map(GoalAtom::referenced_names)
            .filter(|n| {
                *n != "robot"
                    && !world.regions.contains_key(*n)
                    && !objects.iter().any(|o| o.name == *n)
            })
            .collect()
    }
}
