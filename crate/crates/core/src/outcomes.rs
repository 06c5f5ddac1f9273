//! Transcribed per-run outcome tables for success-rate aggregation.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{success_rate, RunOutcome, SrReport};

pub const RUNS_PER_TASK: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    SingleRole,
    MultiRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub task_id: String,
    pub success: bool,
    pub steps: usize,
    /// Step count was made up, not observed.
    #[serde(default)]
    pub synthetic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeFixture {
    pub architecture: Architecture,
    #[serde(default)]
    pub provenance: String,
    pub runs: Vec<OutcomeRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OutcomeError {
    #[error("task {task_id}: {found} runs, expected {expected}")]
    RunCount {
        task_id: String,
        found: usize,
        expected: usize,
    },
    #[error("task {task_id}: successful run {index} has no steps")]
    NoSteps { task_id: String, index: usize },
    #[error("outcome fixture has no runs")]
    Empty,
}

impl OutcomeFixture {
    /// Task ids in first-appearance order.
    pub fn task_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for r in &self.runs {
            if !ids.contains(&r.task_id.as_str()) {
                ids.push(&r.task_id);
            }
        }
        ids
    }

    pub fn validate(&self) -> Result<(), OutcomeError> {
        self.validate_with(RUNS_PER_TASK)
    }

    pub fn validate_with(&self, runs_per_task: usize) -> Result<(), OutcomeError> {
        if self.runs.is_empty() {
            return Err(OutcomeError::Empty);
        }
        for id in self.task_ids() {
            let runs: Vec<&OutcomeRecord> = self.runs.iter().filter(|r| r.task_id == id).collect();
            if runs.len() != runs_per_task {
                return Err(OutcomeError::RunCount {
                    task_id: id.to_string(),
                    found: runs.len(),
                    expected: runs_per_task,
                });
            }
            if let Some(index) = runs.iter().position(|r| r.success && r.steps == 0) {
                return Err(OutcomeError::NoSteps {
                    task_id: id.to_string(),
                    index,
                });
            }
        }
        Ok(())
    }

    pub fn successes(&self, task_id: &str) -> usize {
        self.runs
            .iter()
            .filter(|r| r.task_id == task_id && r.success)
            .count()
    }

    pub fn to_outcomes(&self) -> Vec<RunOutcome> {
        self.runs
            .iter()
            .map(|r| RunOutcome::record(&r.task_id, r.success, r.steps))
            .collect()
    }

    pub fn report(&self) -> SrReport {
        success_rate(&self.to_outcomes())
    }
}
