//! Repeated runs of one fixture with per-stage timing statistics.

use serde::{Deserialize, Serialize};

use crate::run::{run_session, RunError, Session, StageTiming};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub stage: String,
    pub mean_ms: f64,
    /// Sample standard deviation; 0 for one repetition.
    pub sd_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub task_id: String,
    pub repeat: usize,
    pub stages: Vec<StageStats>,
    /// Mean wall-clock of everything after the model calls.
    pub local_mean_ms: f64,
}

pub fn stats(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs the session `repeat` times; the first failed run aborts the bench.
pub fn bench(session: &Session, repeat: usize) -> Result<BenchReport, RunError> {
    let mut timings: Vec<StageTiming> = Vec::with_capacity(repeat);
    for _ in 0..repeat.max(1) {
        let rec = run_session(session);
        if let Some(e) = rec.error {
            return Err(e);
        }
        timings.push(rec.timing);
    }
    let stages = StageTiming::STAGES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let samples: Vec<f64> = timings.iter().map(|t| t.values()[i]).collect();
            let (mean_ms, sd_ms) = stats(&samples);
            StageStats {
                stage: name.to_string(),
                mean_ms,
                sd_ms,
            }
        })
        .collect();
    let locals: Vec<f64> = timings.iter().map(StageTiming::local_ms).collect();
    Ok(BenchReport {
        task_id: session.task_id.clone(),
        repeat: timings.len(),
        stages,
        local_mean_ms: stats(&locals).0,
    })
}

impl BenchReport {
    pub fn render(&self) -> String {
        let mut out = format!("{} ({} runs)\n", self.task_id, self.repeat);
        for s in &self.stages {
            out.push_str(&format!(
                "{:<14} {:>10.3} ms  sd {:>8.3}\n",
                s.stage, s.mean_ms, s.sd_ms
            ));
        }
        out.push_str(&format!(
            "{:<14} {:>10.3} ms\n",
            "local total", self.local_mean_ms
        ));
        out
    }
}
