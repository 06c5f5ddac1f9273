//! Simulated execution of grounded plans and success scoring.
//!
//! A plan succeeds when its goal holds in the final world state. That is
//! the same as "achieved at some step and not undone afterwards";
//! [`achieved_and_kept`] evaluates the latter directly on a trace so the two
//! readings can be cross-checked.

mod goal;
mod sr;
mod world;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use goal::{Axis, GoalAtom, GoalPredicate, Region};
pub use sr::{render_comparison, success_rate, SrReport, SrWarning, TaskSr};
pub use world::{InvariantViolation, ObjectState, RobotState, WorldState, ROBOT};

use crate::plan::{Placement, Primitive};

/// Lateral offset used by `right to` / `left to` / `near` drops.
pub const SIDE_OFFSET_MM: f64 = 150.0;

/// One executable step with world names already resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub primitive: Primitive,
    pub object: Option<String>,
    pub target: Option<String>,
    pub placement: Placement,
}

impl Action {
    pub fn new(
        primitive: Primitive,
        object: Option<&str>,
        target: Option<&str>,
        placement: Placement,
    ) -> Self {
        Self {
            primitive,
            object: object.map(ToString::to_string),
            target: target.map(ToString::to_string),
            placement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "fault", content = "detail", rename_all = "snake_case")]
pub enum ExecFault {
    #[error("gripper occupied by `{0}`")]
    GripperOccupied(String),
    #[error("not holding `{0}`")]
    NotHolding(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("`{0}` is not graspable")]
    NotGraspable(String),
    #[error("`{0}` is held and cannot be pushed or pulled")]
    ObjectHeld(String),
    #[error("`{0}` cannot be placed into itself")]
    SelfContainment(String),
    #[error("{0} step is missing its {1}")]
    MissingArgument(Primitive, String),
}

/// What to do after a fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultPolicy {
    #[default]
    Abort,
    Continue,
}

/// Applies one primitive. On a fault the input state is untouched.
pub fn apply_step(state: &WorldState, action: &Action) -> Result<WorldState, ExecFault> {
    let mut next = state.clone();
    let need_object = || {
        action
            .object
            .as_deref()
            .ok_or_else(|| ExecFault::MissingArgument(action.primitive, "object".into()))
    };
    let need_target = || {
        action
            .target
            .as_deref()
            .ok_or_else(|| ExecFault::MissingArgument(action.primitive, "target".into()))
    };
    match action.primitive {
        Primitive::Grab => {
            let name = need_object()?;
            if let Some(h) = &state.robot.holding {
                return Err(ExecFault::GripperOccupied(h.clone()));
            }
            let robot_at = state.robot.position;
            let (key, obj) = next
                .object_mut(name)
                .ok_or_else(|| ExecFault::UnknownObject(name.to_string()))?;
            if obj.fixed {
                return Err(ExecFault::NotGraspable(key));
            }
            obj.held = true;
            obj.container = None;
            obj.position = robot_at;
            next.robot.holding = Some(key);
        }
        Primitive::Drop => {
            let name = need_object()?;
            let target = need_target()?;
            let key = state
                .object(name)
                .map(|_| next.object_mut(name).expect("present").0)
                .ok_or_else(|| ExecFault::UnknownObject(name.to_string()))?;
            if state.robot.holding.as_deref() != Some(key.as_str()) {
                return Err(ExecFault::NotHolding(key));
            }
            let anchor = state
                .position_of(target)
                .ok_or_else(|| ExecFault::UnknownTarget(target.to_string()))?;
            let container = match state.object(target) {
                Some(_) if action.placement == Placement::Inside => {
                    let (tk, _) = next.object_mut(target).expect("present");
                    if tk == key {
                        return Err(ExecFault::SelfContainment(key));
                    }
                    Some(tk)
                }
                _ => None,
            };
            let position = action.placement.offset(anchor);
            let obj = next.objects.get_mut(&key).expect("present");
            obj.held = false;
            obj.container = container;
            obj.position = position;
            next.robot.holding = None;
        }
        Primitive::Navigate => {
            let target = need_target()?;
            let to = state
                .position_of(target)
                .ok_or_else(|| ExecFault::UnknownTarget(target.to_string()))?;
            next.robot.position = to;
            if let Some(h) = next.robot.holding.clone() {
                next.objects
                    .get_mut(&h)
                    .expect("held object exists")
                    .position = to;
            }
        }
        Primitive::Push | Primitive::Pull => {
            let name = need_object()?;
            let shift = if action.primitive == Primitive::Push {
                state.push_mm
            } else {
                -state.pull_mm
            };
            let (key, obj) = next
                .object_mut(name)
                .ok_or_else(|| ExecFault::UnknownObject(name.to_string()))?;
            if obj.held {
                return Err(ExecFault::ObjectHeld(key));
            }
            obj.position[2] += shift;
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub state: WorldState,
    pub goal_holds: bool,
    pub fault: Option<ExecFault>,
}

/// Result of executing one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub task_id: String,
    pub success: bool,
    pub steps_executed: usize,
    pub aborted: bool,
    pub initial_goal_holds: bool,
    pub trace: Vec<TraceEntry>,
}

impl RunOutcome {
    /// Outcome record without a trace (for transcribed result tables).
    pub fn record(task_id: &str, success: bool, steps: usize) -> Self {
        Self {
            task_id: task_id.to_string(),
            success,
            steps_executed: steps,
            aborted: false,
            initial_goal_holds: false,
            trace: Vec::new(),
        }
    }

    /// Goal truth before any step and after each step.
    pub fn goal_history(&self) -> Vec<bool> {
        core::iter::once(self.initial_goal_holds)
            .chain(self.trace.iter().map(|e| e.goal_holds))
            .collect()
    }
}

/// Executes `actions` in order from `initial` and scores the goal on the
/// final state.
pub fn evaluate(
    task_id: &str,
    actions: &[Action],
    initial: &WorldState,
    goal: &GoalPredicate,
    policy: FaultPolicy,
) -> RunOutcome {
    let mut state = initial.clone();
    let mut trace = Vec::with_capacity(actions.len());
    let mut executed = 0;
    let mut aborted = false;
    for (step, action) in actions.iter().enumerate() {
        let fault = match apply_step(&state, action) {
            Ok(next) => {
                state = next;
                executed += 1;
                None
            }
            Err(f) => Some(f),
        };
        let faulted = fault.is_some();
        trace.push(TraceEntry {
            step,
            state: state.clone(),
            goal_holds: goal.holds(&state),
            fault,
        });
        if faulted && policy == FaultPolicy::Abort {
            aborted = true;
            break;
        }
    }
    RunOutcome {
        task_id: task_id.to_string(),
        success: !aborted && goal.holds(&state),
        steps_executed: executed,
        aborted,
        initial_goal_holds: goal.holds(initial),
        trace,
    }
}

/// "Achieved at some point and not undone afterwards": there is a `k` such
/// that the goal holds at `k` and at every later point of the history.
pub fn achieved_and_kept(history: &[bool]) -> bool {
    (0..history.len()).any(|k| history[k..].iter().all(|&g| g))
}

/// Success of an outcome judged by [`achieved_and_kept`] on its trace.
pub fn trace_success(outcome: &RunOutcome) -> bool {
    !outcome.aborted && achieved_and_kept(&outcome.goal_history())
}

#[cfg(test)]
mod tests;
