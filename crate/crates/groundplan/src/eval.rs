//! Batch evaluation over a manifest of fixtures and success-rate reporting.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use groundplan_core::exec::{success_rate, GoalAtom, GoalPredicate, RunOutcome, SrReport};
use groundplan_core::outcomes::OutcomeFixture;
use serde::{Deserialize, Serialize};

use crate::artifacts::{write_atomic, write_json};
use crate::run::{load_embeddings, run_session, RunError, RunOptions, RunRecord, Session};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub task_id: String,
    pub fixture: PathBuf,
    /// One transcript per run; a single transcript is reused for every run.
    pub transcripts: Vec<PathBuf>,
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Replaces the fixture's goal when present.
    #[serde(default)]
    pub goal: Option<Vec<GoalAtom>>,
}

fn default_runs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub provenance: Option<String>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Reads a manifest and makes its paths relative to the manifest file.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m: Manifest = serde_json::from_str(&text)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut m.entries {
            e.fixture = base.join(&e.fixture);
            for t in &mut e.transcripts {
                *t = base.join(&*t);
            }
            if e.runs == 0 || e.transcripts.is_empty() {
                return Err(RunError::Config(format!(
                    "{}: needs runs >= 1 and a transcript",
                    e.task_id
                )));
            }
            if e.transcripts.len() != 1 && e.transcripts.len() != e.runs {
                return Err(RunError::Config(format!(
                    "{}: {} transcripts for {} runs",
                    e.task_id,
                    e.transcripts.len(),
                    e.runs
                )));
            }
        }
        Ok(m)
    }
}

struct Job<'a> {
    entry: &'a ManifestEntry,
    index: usize,
}

/// Per-run result row of an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub task_id: String,
    pub run: usize,
    pub exit_code: i32,
    pub error: Option<String>,
    pub success: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub runs: Vec<EvalRun>,
    pub report: SrReport,
}

fn run_job(
    job: &Job,
    options: &RunOptions,
    store: &Arc<groundplan_core::grounding::EmbeddingStore>,
) -> RunRecord {
    let e = job.entry;
    let transcript = e.transcripts.get(job.index).unwrap_or(&e.transcripts[0]);
    let mut opts = options.clone();
    opts.transcript = Some(transcript.clone());
    match Session::open_with_store(&e.fixture, e.task.as_deref(), &opts, Arc::clone(store)) {
        Ok(mut s) => {
            s.task_id = e.task_id.clone();
            if let Some(goal) = &e.goal {
                s.goal = GoalPredicate::new(goal.clone());
            }
            run_session(&s)
        }
        Err(err) => RunRecord {
            task_id: e.task_id.clone(),
            error: Some(err),
            ..Default::default()
        },
    }
}

/// Runs every manifest entry `runs` times on `jobs` worker threads. Failed
/// runs count as unsuccessful. Artifacts go to `out/<task_id>/run_<k>`.
pub fn evaluate_manifest(
    manifest: &Manifest,
    options: &RunOptions,
    out: Option<&Path>,
    jobs: usize,
) -> Result<EvalReport, RunError> {
    let store = Arc::new(load_embeddings(&options.embeddings)?);
    let queue: Vec<Job> = manifest
        .entries
        .iter()
        .flat_map(|entry| (0..entry.runs).map(move |index| Job { entry, index }))
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<(EvalRun, RunOutcome)>>> = Mutex::new(vec![None; queue.len()]);
    let io_error: Mutex<Option<RunError>> = Mutex::new(None);

    thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(queue.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = queue.get(i) else { break };
                let record = run_job(job, options, &store);
                if let Some(dir) = out {
                    let dir = dir
                        .join(&job.entry.task_id)
                        .join(format!("run_{}", job.index));
                    if let Err(source) = record.write(&dir) {
                        io_error
                            .lock()
                            .expect("poisoned")
                            .get_or_insert(RunError::Io { path: dir, source });
                    }
                }
                let success = record.succeeded();
                let steps = record.outcome.as_ref().map_or(0, |o| o.steps_executed);
                let row = EvalRun {
                    task_id: job.entry.task_id.clone(),
                    run: job.index,
                    exit_code: record.exit_code(),
                    error: record.error.as_ref().map(ToString::to_string),
                    success,
                    steps,
                };
                let outcome = RunOutcome::record(&job.entry.task_id, success, steps);
                results.lock().expect("poisoned")[i] = Some((row, outcome));
            });
        }
    });
    if let Some(e) = io_error.into_inner().expect("poisoned") {
        return Err(e);
    }
    let (runs, outcomes): (Vec<_>, Vec<_>) = results
        .into_inner()
        .expect("poisoned")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .unzip();
    let report = EvalReport {
        runs,
        report: success_rate(&outcomes),
    };
    if let Some(dir) = out {
        write_json(&dir.join("sr_report.json"), &report).map_err(|source| RunError::Io {
            path: dir.into(),
            source,
        })?;
        write_atomic(
            &dir.join("sr_table.txt"),
            report.report.render_table().as_bytes(),
        )
        .map_err(|source| RunError::Io {
            path: dir.into(),
            source,
        })?;
    }
    Ok(report)
}

/// Loads and validates a transcribed outcome table. Errors name the file
/// and, where applicable, the offending task.
pub fn load_outcome_fixture(path: &Path) -> Result<OutcomeFixture, RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let fixture: OutcomeFixture = serde_json::from_str(&text)
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    fixture
        .validate()
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    Ok(fixture)
}
