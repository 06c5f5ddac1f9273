//! Stage functions and the SMK → GMK → P pipeline.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parse::{parse_gmk, parse_planner, parse_triples, LineWarning};
use super::{render_template, BackendError, ModelBackend, ModelRequest, RoleId};
use crate::grounding::{assign_instance_names, GroundingWarning, PosTagger};
use crate::scene::{RgbdFrame, SceneGraph, TaskDescription};

/// Prompt templates. Placeholders: `{task}` everywhere, `{triples}` for the
/// summarizer, `{summary}` and `{objects}` for the planner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompts {
    pub smk_system: String,
    pub smk_user: String,
    pub gmk_system: String,
    pub gmk_user: String,
    pub planner_system: String,
    pub planner_user: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            smk_system: include_str!("../../assets/prompts/smk_system.txt").into(),
            smk_user: include_str!("../../assets/prompts/smk_user.txt").into(),
            gmk_system: include_str!("../../assets/prompts/gmk_system.txt").into(),
            gmk_user: include_str!("../../assets/prompts/gmk_user.txt").into(),
            planner_system: include_str!("../../assets/prompts/planner_system.txt").into(),
            planner_user: include_str!("../../assets/prompts/planner_user.txt").into(),
        }
    }
}

impl Prompts {
    pub fn smk_request(
        &self,
        frame: &RgbdFrame,
        task: &TaskDescription,
    ) -> Result<ModelRequest, BackendError> {
        ModelRequest::new(
            RoleId::Smk,
            self.smk_system.clone(),
            render_template(&self.smk_user, &[("task", task.as_str())]),
            Some(frame.rgb_digest()),
        )
    }

    pub fn gmk_request(
        &self,
        graph: &SceneGraph,
        frame: &RgbdFrame,
        task: &TaskDescription,
    ) -> Result<ModelRequest, BackendError> {
        let triples = graph.render();
        ModelRequest::new(
            RoleId::Gmk,
            self.gmk_system.clone(),
            render_template(
                &self.gmk_user,
                &[("task", task.as_str()), ("triples", triples.trim_end())],
            ),
            Some(frame.rgb_digest()),
        )
    }

    pub fn planner_request(
        &self,
        summary: &GmkSummary,
        task: &TaskDescription,
    ) -> Result<ModelRequest, BackendError> {
        let objects = summary.object_list();
        ModelRequest::new(
            RoleId::Planner,
            self.planner_system.clone(),
            render_template(
                &self.planner_user,
                &[
                    ("task", task.as_str()),
                    ("summary", summary.compact_description.as_str()),
                    ("objects", objects.as_str()),
                ],
            ),
            None,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{role} response could not be parsed: {raw:?}")]
    Parse { role: RoleId, raw: String },
    #[error("empty plan")]
    EmptyPlan,
    #[error("precondition: {0}")]
    Precondition(String),
}

impl StageError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, StageError::Backend(e) if e.is_retryable())
    }
}

/// One request/response pair, as written to the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub role: RoleId,
    pub key: String,
    pub request: ModelRequest,
    pub response: String,
    pub backend_id: String,
    pub latency: Duration,
}

fn call(
    backend: &dyn ModelBackend,
    request: ModelRequest,
    log: &mut Vec<Exchange>,
) -> Result<String, StageError> {
    let response = backend.complete(&request)?;
    let text = response.text.clone();
    log.push(Exchange {
        role: request.role,
        key: request.transcript_key(),
        request,
        response: response.text,
        backend_id: response.backend_id,
        latency: response.latency,
    });
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmkOutput {
    pub graph: SceneGraph,
    pub warnings: Vec<LineWarning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GmkSummary {
    pub compact_description: String,
    /// Case-folded object phrase → unique instance name. Phrases naming the
    /// same object may share a name.
    pub renamed_objects: BTreeMap<String, String>,
    pub warnings: Vec<LineWarning>,
    pub naming_warnings: Vec<GroundingWarning>,
}

impl GmkSummary {
    /// `phrase -> name` lines for the planner prompt, sorted by phrase.
    pub fn object_list(&self) -> String {
        let mut out = String::new();
        for (phrase, name) in &self.renamed_objects {
            out.push_str(phrase);
            out.push_str(" -> ");
            out.push_str(name);
            out.push('\n');
        }
        out.trim_end().to_string()
    }
}

fn run_smk_logged(
    frame: &RgbdFrame,
    task: &TaskDescription,
    backend: &dyn ModelBackend,
    prompts: &Prompts,
    log: &mut Vec<Exchange>,
) -> Result<SmkOutput, StageError> {
    let text = call(backend, prompts.smk_request(frame, task)?, log)?;
    let parsed = parse_triples(&text);
    if parsed.triples.is_empty() {
        return Err(StageError::Parse {
            role: RoleId::Smk,
            raw: text,
        });
    }
    let mut graph = SceneGraph::new(frame.rgb_digest());
    graph.extend(parsed.triples);
    Ok(SmkOutput {
        graph,
        warnings: parsed.warnings,
    })
}

fn run_gmk_logged(
    graph: &SceneGraph,
    frame: &RgbdFrame,
    task: &TaskDescription,
    backend: &dyn ModelBackend,
    prompts: &Prompts,
    tagger: &PosTagger,
    log: &mut Vec<Exchange>,
) -> Result<GmkSummary, StageError> {
    if graph.is_empty() {
        return Err(StageError::Precondition("scene graph is empty".into()));
    }
    let text = call(backend, prompts.gmk_request(graph, frame, task)?, log)?;
    let (compact_description, provided, warnings) = parse_gmk(&text);
    if compact_description.is_empty() && provided.is_empty() {
        return Err(StageError::Parse {
            role: RoleId::Gmk,
            raw: text,
        });
    }
    let (renamed_objects, naming_warnings) = assign_instance_names(graph, tagger, &provided);
    Ok(GmkSummary {
        compact_description,
        renamed_objects,
        warnings,
        naming_warnings,
    })
}

fn run_planner_logged(
    summary: &GmkSummary,
    task: &TaskDescription,
    backend: &dyn ModelBackend,
    prompts: &Prompts,
    log: &mut Vec<Exchange>,
) -> Result<String, StageError> {
    let text = call(backend, prompts.planner_request(summary, task)?, log)?;
    parse_planner(&text).ok_or(StageError::EmptyPlan)
}

/// Scene miner: image + task → scene graph.
pub fn run_smk(
    frame: &RgbdFrame,
    task: &TaskDescription,
    backend: &dyn ModelBackend,
    prompts: &Prompts,
) -> Result<SmkOutput, StageError> {
    run_smk_logged(frame, task, backend, prompts, &mut Vec::new())
}

/// Scene summarizer: parsed graph (never raw miner text) → summary and
/// unique names. Phrases the model leaves unnamed get `<head>_<k>` names.
pub fn run_gmk(
    graph: &SceneGraph,
    frame: &RgbdFrame,
    task: &TaskDescription,
    backend: &dyn ModelBackend,
    prompts: &Prompts,
    tagger: &PosTagger,
) -> Result<GmkSummary, StageError> {
    run_gmk_logged(
        graph,
        frame,
        task,
        backend,
        prompts,
        tagger,
        &mut Vec::new(),
    )
}

/// Planner: summary → raw plan text.
pub fn run_planner(
    summary: &GmkSummary,
    task: &TaskDescription,
    backend: &dyn ModelBackend,
    prompts: &Prompts,
) -> Result<String, StageError> {
    run_planner_logged(summary, task, backend, prompts, &mut Vec::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageLatencies {
    pub smk: Duration,
    pub gmk: Duration,
    pub planner: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub graph: SceneGraph,
    pub smk_warnings: Vec<LineWarning>,
    pub summary: GmkSummary,
    pub plan_text: String,
    /// Every request/response pair in stage order.
    pub exchanges: Vec<Exchange>,
    pub latencies: StageLatencies,
}

impl PipelineResult {
    /// Copy with every latency zeroed, for replay comparisons.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        out.latencies = StageLatencies::default();
        for e in &mut out.exchanges {
            e.latency = Duration::ZERO;
        }
        out
    }
}

/// The failing stage plus everything produced before it.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("{stage} stage failed: {error}")]
pub struct PipelineError {
    pub stage: RoleId,
    pub error: StageError,
    pub graph: Option<SceneGraph>,
    pub summary: Option<GmkSummary>,
    pub exchanges: Vec<Exchange>,
}

fn latency_of(log: &[Exchange], role: RoleId) -> Duration {
    log.iter()
        .filter(|e| e.role == role)
        .map(|e| e.latency)
        .sum()
}

/// Runs SMK, GMK and P strictly in order.
#[allow(clippy::result_large_err)]
pub fn run_pipeline(
    frame: &RgbdFrame,
    task: &TaskDescription,
    backend: &dyn ModelBackend,
    prompts: &Prompts,
    tagger: &PosTagger,
) -> Result<PipelineResult, PipelineError> {
    let mut log = Vec::new();
    let fail = |stage, error, graph, summary, log: Vec<Exchange>| PipelineError {
        stage,
        error,
        graph,
        summary,
        exchanges: log,
    };
    let smk = match run_smk_logged(frame, task, backend, prompts, &mut log) {
        Ok(s) => s,
        Err(e) => return Err(fail(RoleId::Smk, e, None, None, log)),
    };
    let summary = match run_gmk_logged(&smk.graph, frame, task, backend, prompts, tagger, &mut log)
    {
        Ok(s) => s,
        Err(e) => return Err(fail(RoleId::Gmk, e, Some(smk.graph), None, log)),
    };
    let plan_text = match run_planner_logged(&summary, task, backend, prompts, &mut log) {
        Ok(p) => p,
        Err(e) => {
            return Err(fail(
                RoleId::Planner,
                e,
                Some(smk.graph),
                Some(summary),
                log,
            ))
        }
    };
    let latencies = StageLatencies {
        smk: latency_of(&log, RoleId::Smk),
        gmk: latency_of(&log, RoleId::Gmk),
        planner: latency_of(&log, RoleId::Planner),
    };
    Ok(PipelineResult {
        graph: smk.graph,
        smk_warnings: smk.warnings,
        summary,
        plan_text,
        exchanges: log,
        latencies,
    })
}
