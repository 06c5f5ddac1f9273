//! Success-rate aggregation.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::RunOutcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSr {
    pub task_id: String,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub steps_mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single run.
    pub steps_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SrWarning {
    EmptyGroup { task_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrReport {
    pub tasks: Vec<TaskSr>,
    /// Unweighted mean of the per-task rates.
    pub average_success_rate: f64,
    pub warnings: Vec<SrWarning>,
}

/// Groups outcomes by task id (first-appearance order) and aggregates.
pub fn success_rate(outcomes: &[RunOutcome]) -> SrReport {
    let mut groups: Vec<(&str, Vec<&RunOutcome>)> = Vec::new();
    for o in outcomes {
        match groups.iter_mut().find(|(id, _)| *id == o.task_id) {
            Some((_, g)) => g.push(o),
            None => groups.push((&o.task_id, alloc::vec![o])),
        }
    }
    SrReport::from_groups(groups.iter().map(|(id, g)| (*id, g.as_slice())))
}

impl SrReport {
    /// Aggregates pre-grouped outcomes. Empty groups are dropped with a
    /// warning.
    pub fn from_groups<'a, I>(groups: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a [&'a RunOutcome])>,
    {
        let mut tasks = Vec::new();
        let mut warnings = Vec::new();
        for (task_id, runs) in groups {
            if runs.is_empty() {
                warnings.push(SrWarning::EmptyGroup {
                    task_id: task_id.to_string(),
                });
                continue;
            }
            let n = runs.len();
            let successes = runs.iter().filter(|o| o.success).count();
            let mean = runs.iter().map(|o| o.steps_executed as f64).sum::<f64>() / n as f64;
            let var = if n > 1 {
                runs.iter()
                    .map(|o| (o.steps_executed as f64 - mean) * (o.steps_executed as f64 - mean))
                    .sum::<f64>()
                    / (n - 1) as f64
            } else {
                0.0
            };
            tasks.push(TaskSr {
                task_id: task_id.to_string(),
                runs: n,
                successes,
                success_rate: successes as f64 / n as f64,
                steps_mean: mean,
                steps_sd: libm::sqrt(var),
            });
        }
        let average_success_rate = if tasks.is_empty() {
            0.0
        } else {
            tasks.iter().map(|t| t.success_rate).sum::<f64>() / tasks.len() as f64
        };
        Self {
            tasks,
            average_success_rate,
            warnings,
        }
    }

    pub fn task(&self, task_id: &str) -> Option<&TaskSr> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    /// Aligned text table: one row per task plus the average.
    pub fn render_table(&self) -> String {
        render_comparison(&[("SR", self)])
    }
}

/// Side-by-side table of several reports (e.g. single- vs multi-role),
/// rates printed with two decimals. Rows follow the first report's tasks.
pub fn render_comparison(columns: &[(&str, &SrReport)]) -> String {
    let mut rows: Vec<&str> = Vec::new();
    for (_, r) in columns {
        for t in &r.tasks {
            if !rows.contains(&t.task_id.as_str()) {
                rows.push(&t.task_id);
            }
        }
    }
    let label = "Average SR";
    let first = rows
        .iter()
        .map(|r| r.len())
        .chain([label.len(), 4])
        .max()
        .unwrap_or(4);
    let widths: Vec<usize> = columns.iter().map(|(h, _)| h.len().max(4)).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<first$}", "Task");
    for ((h, _), w) in columns.iter().zip(&widths) {
        let _ = write!(out, " | {h:>w$}");
    }
    out.push('\n');
    let rule = first + widths.iter().map(|w| w + 3).sum::<usize>();
    out.extend(core::iter::repeat_n('-', rule));
    out.push('\n');
    for task in &rows {
        let _ = write!(out, "{task:<first$}");
        for ((_, r), w) in columns.iter().zip(&widths) {
            match r.task(task) {
                Some(t) => {
                    let _ = write!(out, " | {:>w$.2}", t.success_rate);
                }
                None => {
                    let _ = write!(out, " | {:>w$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out.extend(core::iter::repeat_n('-', rule));
    out.push('\n');
    let _ = write!(out, "{label:<first$}");
    for ((_, r), w) in columns.iter().zip(&widths) {
        let _ = write!(out, " | {:>w$.2}", r.average_success_rate);
    }
    out.push('\n');
    out
}
