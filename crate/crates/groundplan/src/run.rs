//! One end-to-end run: roles, grounding, perception, geometry, plan parsing
//! and validation, simulated execution.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use groundplan_core::exec::{evaluate, FaultPolicy, GoalPredicate, RunOutcome, WorldState};
use groundplan_core::geometry::{
    grasp_points, GeometryConfig, GeometryError, GraspPoint, DEFAULT_MIN_POINTS,
};
use groundplan_core::grounding::{
    classify_objects, ClassifyConfig, EmbeddingStore, GroundedLabelSet, GroundingWarning,
    Normalization, DEFAULT_TAU,
};
use groundplan_core::perception::{perceive, Detections, Detector, Segmenter, SimulatedPerception};
use groundplan_core::plan::{
    validate_plan, Plan, PlanAudit, PlanParser, Vocabulary, DEFAULT_VERB_THRESHOLD,
};
use groundplan_core::roles::{
    run_pipeline, Exchange, GmkSummary, LineWarning, ModelBackend, Prompts, RoleId,
};
use groundplan_core::scene::{SceneGraph, TaskDescription};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifacts::{write_atomic, write_json};
use crate::fixture::{load_fixture, FixtureError, LoadedFixture};
use crate::http::{ChatBackend, ChatConfig, HttpDetector, HttpSegmenter, ServiceConfig};
use crate::transcript::{load_transcript, render_run_log, TranscriptError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Live,
    #[default]
    Replay,
}

/// Everything a run needs besides the fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub backend: BackendMode,
    pub transcript: Option<PathBuf>,
    pub embeddings: PathBuf,
    pub tau: f64,
    pub symmetric_similarity: bool,
    pub verb_threshold: f64,
    pub fault_policy: FaultPolicy,
    pub seed: u64,
    pub synonyms: Option<PathBuf>,
    pub connectives: Option<PathBuf>,
    pub min_points: usize,
    pub trim_fraction: f64,
    pub detector_url: Option<String>,
    pub segmenter_url: Option<String>,
    pub image: Option<PathBuf>,
}

impl RunOptions {
    pub fn new(embeddings: impl Into<PathBuf>) -> Self {
        Self {
            backend: BackendMode::Replay,
            transcript: None,
            embeddings: embeddings.into(),
            tau: DEFAULT_TAU,
            symmetric_similarity: false,
            verb_threshold: DEFAULT_VERB_THRESHOLD,
            fault_policy: FaultPolicy::Abort,
            seed: 0,
            synonyms: None,
            connectives: None,
            min_points: DEFAULT_MIN_POINTS,
            trim_fraction: 0.0,
            detector_url: None,
            segmenter_url: None,
            image: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("fixture: {0}")]
    Fixture(#[from] FixtureError),
    #[error("fixture has no ground-truth objects for simulated perception")]
    NoGroundTruth,
    #[error("{stage}: {message}")]
    Stage { stage: String, message: String },
}

impl RunError {
    /// 0 success, 1 stage failure, 2 missing I/O or configuration, 3 invalid
    /// fixture.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Stage { .. } => 1,
            RunError::Config(_) | RunError::Io { .. } | RunError::Transcript(_) => 2,
            RunError::Fixture(e) if e.is_io() => 2,
            RunError::Fixture(_) | RunError::NoGroundTruth => 3,
        }
    }

    fn stage(stage: &str, message: impl ToString) -> Self {
        RunError::Stage {
            stage: stage.into(),
            message: message.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore, RunError> {
    EmbeddingStore::parse_word2vec(&read(path)?)
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

/// Loaded inputs for one fixture and task, reusable across repetitions.
pub struct Session {
    pub fixture: LoadedFixture,
    pub task_id: String,
    pub task: TaskDescription,
    pub goal: GoalPredicate,
    pub store: Arc<EmbeddingStore>,
    pub vocabulary: Vocabulary,
    pub prompts: Prompts,
    pub backend: Box<dyn ModelBackend>,
    pub detector: Box<dyn Detector>,
    pub segmenter: Box<dyn Segmenter>,
    pub options: RunOptions,
}

impl Session {
    /// Loads the fixture, embeddings, vocabulary and backends. `task` falls
    /// back to the fixture's own task text.
    pub fn open(
        fixture: &Path,
        task: Option<&str>,
        options: &RunOptions,
    ) -> Result<Self, RunError> {
        let store = Arc::new(load_embeddings(&options.embeddings)?);
        Self::open_with_store(fixture, task, options, store)
    }

    pub fn open_with_store(
        fixture_path: &Path,
        task: Option<&str>,
        options: &RunOptions,
        store: Arc<EmbeddingStore>,
    ) -> Result<Self, RunError> {
        // Backend configuration problems surface before fixture content.
        let backend: Box<dyn ModelBackend> = match options.backend {
            BackendMode::Replay => {
                let path = options
                    .transcript
                    .as_deref()
                    .ok_or_else(|| RunError::Config("replay mode needs --transcript".into()))?;
                Box::new(load_transcript(path)?)
            }
            BackendMode::Live => {
                let mut config =
                    ChatConfig::from_env().map_err(|e| RunError::Config(e.to_string()))?;
                config.seed = Some(options.seed);
                Box::new(ChatBackend::new(config))
            }
        };
        let fixture = load_fixture(fixture_path)?;
        let task = match task {
            Some(t) => TaskDescription::new(t).map_err(|e| RunError::Config(e.to_string()))?,
            None => fixture.task.clone().ok_or_else(|| {
                RunError::Config("no --task given and the fixture names none".into())
            })?,
        };
        let task_id = fixture.task_id.clone().unwrap_or_else(|| {
            fixture_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        });

        let mut vocabulary = Vocabulary::default();
        if let Some(p) = &options.synonyms {
            vocabulary = vocabulary
                .with_synonyms(&read(p)?)
                .map_err(|e| RunError::Config(e.to_string()))?;
        }
        if let Some(p) = &options.connectives {
            vocabulary = vocabulary
                .with_connectives(&read(p)?)
                .map_err(|e| RunError::Config(e.to_string()))?;
        }

        let image = match &options.image {
            Some(p) => Some(Arc::new(fs::read(p).map_err(|source| RunError::Io {
                path: p.clone(),
                source,
            })?)),
            None => None,
        };
        let simulated = SimulatedPerception::new(&fixture.scene);
        let detector: Box<dyn Detector> = match &options.detector_url {
            Some(url) => Box::new(HttpDetector::new(
                ServiceConfig::new(url.clone()),
                image.clone(),
            )),
            None if fixture.scene.objects.is_none() => return Err(RunError::NoGroundTruth),
            None => Box::new(simulated.clone()),
        };
        let segmenter: Box<dyn Segmenter> = match &options.segmenter_url {
            Some(url) => Box::new(HttpSegmenter::new(ServiceConfig::new(url.clone()), image)),
            None if fixture.scene.objects.is_none() => return Err(RunError::NoGroundTruth),
            None => Box::new(simulated),
        };

        Ok(Self {
            goal: GoalPredicate::new(fixture.scene.goal.clone()),
            fixture,
            task_id,
            task,
            store,
            vocabulary,
            prompts: Prompts::default(),
            backend,
            detector,
            segmenter,
            options: options.clone(),
        })
    }
}

/// Wall-clock per stage, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTiming {
    pub model_smk_ms: f64,
    pub model_gmk_ms: f64,
    pub model_planner_ms: f64,
    pub grounding_ms: f64,
    pub perception_ms: f64,
    pub geometry_ms: f64,
    pub parsing_ms: f64,
    pub execution_ms: f64,
}

impl StageTiming {
    pub const STAGES: [&'static str; 8] = [
        "model_smk",
        "model_gmk",
        "model_planner",
        "grounding",
        "perception",
        "geometry",
        "parsing",
        "execution",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.model_smk_ms,
            self.model_gmk_ms,
            self.model_planner_ms,
            self.grounding_ms,
            self.perception_ms,
            self.geometry_ms,
            self.parsing_ms,
            self.execution_ms,
        ]
    }

    /// Everything after the model calls.
    pub fn local_ms(&self) -> f64 {
        self.values()[3..].iter().sum()
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraphArtifact {
    pub graph: SceneGraph,
    pub warnings: Vec<LineWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsArtifact {
    pub labels: GroundedLabelSet,
    pub warnings: Vec<GroundingWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspArtifact {
    pub grasp_points: Vec<GraspPoint>,
    pub failures: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub task_id: String,
    pub exit_code: i32,
    pub error: Option<String>,
    pub plan_valid: bool,
    pub success: Option<bool>,
}

/// Everything one run produced. Stages after a failure are `None`.
#[derive(Debug, Default)]
pub struct RunRecord {
    pub task_id: String,
    pub graph: Option<SceneGraphArtifact>,
    pub summary: Option<GmkSummary>,
    pub plan_text: Option<String>,
    pub exchanges: Vec<Exchange>,
    pub labels: Option<LabelsArtifact>,
    pub detections: Option<Detections>,
    pub grasp: Option<GraspArtifact>,
    pub plan: Option<Plan>,
    pub audit: Option<PlanAudit>,
    pub plan_valid: bool,
    pub outcome: Option<RunOutcome>,
    pub timing: StageTiming,
    pub error: Option<RunError>,
}

impl RunRecord {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, RunError::exit_code)
    }

    pub fn status(&self) -> Status {
        Status {
            task_id: self.task_id.clone(),
            exit_code: self.exit_code(),
            error: self.error.as_ref().map(ToString::to_string),
            plan_valid: self.plan_valid,
            success: self.outcome.as_ref().map(|o| o.success),
        }
    }

    /// Success for SR purposes: the run completed, the plan validated and
    /// the goal held at the end.
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.outcome.as_ref().is_some_and(|o| o.success)
    }

    /// Writes every artifact that exists. `timing.json` is the only one that
    /// varies between identical runs.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        if let Some(g) = &self.graph {
            write_json(&dir.join("scene_graph.json"), g)?;
        }
        if let Some(s) = &self.summary {
            write_json(&dir.join("summary.json"), s)?;
        }
        if let Some(p) = &self.plan_text {
            write_atomic(&dir.join("plan.txt"), format!("{p}\n").as_bytes())?;
        }
        if let Some(l) = &self.labels {
            write_json(&dir.join("labels.json"), l)?;
        }
        if let Some(d) = &self.detections {
            write_json(&dir.join("detections.json"), d)?;
        }
        if let Some(g) = &self.grasp {
            write_json(&dir.join("grasp_points.json"), g)?;
        }
        if let Some(p) = &self.plan {
            write_json(&dir.join("plan.json"), p)?;
        }
        if let Some(a) = &self.audit {
            write_json(&dir.join("validation.json"), a)?;
        }
        if let Some(o) = &self.outcome {
            write_json(&dir.join("outcome.json"), o)?;
        }
        let mut log = self.exchanges.clone();
        for e in &mut log {
            if e.backend_id == "replay" {
                e.latency = Duration::ZERO;
            }
        }
        write_atomic(&dir.join("run_log.jsonl"), render_run_log(&log).as_bytes())?;
        write_json(&dir.join("timing.json"), &self.timing)?;
        write_json(&dir.join("status.json"), &self.status())
    }
}

/// Runs every stage once, recording whatever was produced before a failure.
pub fn run_session(session: &Session) -> RunRecord {
    let mut rec = RunRecord {
        task_id: session.task_id.clone(),
        ..Default::default()
    };
    if let Err(e) = run_stages(session, &mut rec) {
        rec.error = Some(e);
    }
    rec
}

fn run_stages(s: &Session, rec: &mut RunRecord) -> Result<(), RunError> {
    let tagger = crate::shipped_tagger();
    let frame = &s.fixture.scene.frame;

    let pipeline = run_pipeline(frame, &s.task, s.backend.as_ref(), &s.prompts, tagger);
    let model_time = |ex: &[Exchange], role| {
        ms(ex
            .iter()
            .filter(|e| e.role == role)
            .map(|e| e.latency)
            .sum())
    };
    let result = match pipeline {
        Ok(r) => r,
        Err(e) => {
            rec.graph = e.graph.map(|graph| SceneGraphArtifact {
                graph,
                warnings: Vec::new(),
            });
            rec.summary = e.summary;
            rec.exchanges = e.exchanges;
            return Err(RunError::stage(&format!("{} role", e.stage), e.error));
        }
    };
    rec.timing.model_smk_ms = model_time(&result.exchanges, RoleId::Smk);
    rec.timing.model_gmk_ms = model_time(&result.exchanges, RoleId::Gmk);
    rec.timing.model_planner_ms = model_time(&result.exchanges, RoleId::Planner);
    rec.graph = Some(SceneGraphArtifact {
        graph: result.graph.clone(),
        warnings: result.smk_warnings.clone(),
    });
    rec.summary = Some(result.summary.clone());
    rec.plan_text = Some(result.plan_text.clone());
    rec.exchanges = result.exchanges.clone();

    let t = Instant::now();
    let config = ClassifyConfig {
        tau: s.options.tau,
        normalization: if s.options.symmetric_similarity {
            Normalization::BothLists
        } else {
            Normalization::FirstList
        },
    };
    let classification = classify_objects(
        &result.graph,
        &s.store,
        tagger,
        config,
        Some(&result.summary.renamed_objects),
    )
    .map_err(|e| RunError::stage("grounding", e))?;
    let labels = classification.labels.clone();
    rec.labels = Some(LabelsArtifact {
        labels: classification.labels,
        warnings: classification.warnings,
    });
    rec.timing.grounding_ms = ms(t.elapsed());

    let t = Instant::now();
    let detections = perceive(
        frame,
        &result.graph,
        &labels,
        s.detector.as_ref(),
        s.segmenter.as_ref(),
    )
    .map_err(|e| RunError::stage("perception", e))?;
    rec.timing.perception_ms = ms(t.elapsed());

    let t = Instant::now();
    let config = GeometryConfig {
        min_points: s.options.min_points,
        trim_fraction: s.options.trim_fraction,
    };
    let (points, failures) = grasp_points(frame, &detections.masks, config);
    rec.detections = Some(detections);
    rec.grasp = Some(GraspArtifact {
        grasp_points: points.values().cloned().collect(),
        failures: failures
            .iter()
            .map(|(n, e): &(String, GeometryError)| (n.clone(), e.to_string()))
            .collect(),
    });
    rec.timing.geometry_ms = ms(t.elapsed());

    let t = Instant::now();
    let known: Vec<&str> = labels
        .aliases
        .keys()
        .chain(labels.instance_names.keys())
        .map(String::as_str)
        .collect();
    let mut parser = PlanParser::new(&s.vocabulary)
        .with_store(&s.store)
        .with_known_objects(known);
    parser.verb_threshold = s.options.verb_threshold;
    let plan = parser
        .parse(&result.plan_text)
        .map_err(|e| RunError::stage("plan parsing", e))?;
    let validation = validate_plan(&plan, &labels, &points, &s.vocabulary);
    rec.audit = Some(validation.audit(&plan));
    rec.plan_valid = validation.is_valid();
    rec.plan = Some(plan);
    rec.timing.parsing_ms = ms(t.elapsed());
    if !validation.is_valid() {
        let hard: Vec<String> = validation
            .violations
            .iter()
            .filter(|v| v.severity == groundplan_core::plan::Severity::Hard)
            .map(ToString::to_string)
            .collect();
        return Err(RunError::stage("plan validation", hard.join("; ")));
    }

    let t = Instant::now();
    let world = WorldState::from_fixture(&s.fixture.scene);
    rec.outcome = Some(evaluate(
        &s.task_id,
        &validation.actions(),
        &world,
        &s.goal,
        s.options.fault_policy,
    ));
    rec.timing.execution_ms = ms(t.elapsed());
    Ok(())
}

/// `run` subcommand: open, execute, write artifacts. Returns the record;
/// errors opening the session come back as a record with only `error` set.
pub fn cmd_run(
    fixture: &Path,
    task: Option<&str>,
    options: &RunOptions,
    out: Option<&Path>,
) -> RunRecord {
    let record = match Session::open(fixture, task, options) {
        Ok(session) => run_session(&session),
        Err(e) => RunRecord {
            task_id: fixture
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            error: Some(e),
            ..Default::default()
        },
    };
    if let Some(dir) = out {
        if let Err(e) = record.write(dir) {
            return RunRecord {
                error: Some(RunError::Io {
                    path: dir.to_path_buf(),
                    source: e,
                }),
                ..record
            };
        }
    }
    record
}

/// Runs the three roles once against `backend` and returns the recorded
/// transcript. Used to author replay transcripts from scripted or live
/// answers.
pub fn record_transcript<B: ModelBackend>(
    fixture: &Path,
    task: Option<&str>,
    backend: B,
) -> Result<groundplan_core::roles::ReplayBackend, RunError> {
    let loaded = load_fixture(fixture)?;
    let task = match task {
        Some(t) => TaskDescription::new(t).map_err(|e| RunError::Config(e.to_string()))?,
        None => loaded
            .task
            .clone()
            .ok_or_else(|| RunError::Config("no task given".into()))?,
    };
    let recorder = crate::transcript::RecordingBackend::new(backend);
    run_pipeline(
        &loaded.scene.frame,
        &task,
        &recorder,
        &Prompts::default(),
        crate::shipped_tagger(),
    )
    .map_err(|e| RunError::stage(&format!("{} role", e.stage), e.error))?;
    Ok(recorder.transcript())
}
