//! Transcript files, recording and scripted backends, and the run log.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use groundplan_core::roles::{
    BackendError, Exchange, ModelBackend, ModelRequest, ModelResponse, ReplayBackend, RoleId,
    TranscriptEntry,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript not found: {0}")]
    NotFound(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: duplicate key {key}")]
    DuplicateKey { path: PathBuf, key: String },
}

/// Reads a JSON list of `{key, response}` entries.
pub fn load_transcript(path: &Path) -> Result<ReplayBackend, TranscriptError> {
    let text = fs::read_to_string(path).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            TranscriptError::NotFound(path.to_path_buf())
        } else {
            TranscriptError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    let entries: Vec<TranscriptEntry> =
        serde_json::from_str(&text).map_err(|source| TranscriptError::Json {
            path: path.to_path_buf(),
            source,
        })?;
    let mut seen = std::collections::BTreeSet::new();
    for e in &entries {
        if !seen.insert(e.key.as_str()) {
            return Err(TranscriptError::DuplicateKey {
                path: path.to_path_buf(),
                key: e.key.clone(),
            });
        }
    }
    Ok(ReplayBackend::new(entries))
}

pub fn save_transcript(path: &Path, backend: &ReplayBackend) -> io::Result<()> {
    let entries: Vec<TranscriptEntry> = backend.entries().collect();
    crate::artifacts::write_json(path, &entries)
}

/// Wraps another backend and keeps every successful answer for replay.
pub struct RecordingBackend<B> {
    inner: B,
    recorded: Mutex<ReplayBackend>,
}

impl<B: ModelBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            recorded: Mutex::new(ReplayBackend::default()),
        }
    }

    pub fn transcript(&self) -> ReplayBackend {
        self.recorded.lock().expect("recorder lock").clone()
    }
}

impl<B: ModelBackend> ModelBackend for RecordingBackend<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let response = self.inner.complete(request)?;
        self.recorded
            .lock()
            .expect("recorder lock")
            .insert(request, response.text.clone());
        Ok(response)
    }
}

/// Answers each role with a fixed text, whatever the prompt. Used to author
/// transcripts from hand-written role outputs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptedBackend {
    #[serde(rename = "SMK", default)]
    pub smk: Option<String>,
    #[serde(rename = "GMK", default)]
    pub gmk: Option<String>,
    #[serde(rename = "P", default)]
    pub planner: Option<String>,
}

impl ModelBackend for ScriptedBackend {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let text = match request.role {
            RoleId::Smk => &self.smk,
            RoleId::Gmk => &self.gmk,
            RoleId::Planner => &self.planner,
        };
        let text = text.clone().ok_or_else(|| {
            BackendError::Config(format!("no scripted {} response", request.role))
        })?;
        Ok(ModelResponse {
            text,
            latency: Duration::ZERO,
            backend_id: self.id().into(),
        })
    }
}

/// Measures wall-clock latency around a backend that reports none.
pub struct Timed<B>(pub B);

impl<B: ModelBackend> ModelBackend for Timed<B> {
    fn id(&self) -> &str {
        self.0.id()
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let start = Instant::now();
        let mut r = self.0.complete(request)?;
        if r.latency.is_zero() && r.backend_id != "replay" {
            r.latency = start.elapsed();
        }
        Ok(r)
    }
}

/// One line of the JSON-lines run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogRecord {
    pub stage: RoleId,
    pub key: String,
    pub backend_id: String,
    pub latency_ms: f64,
    pub request: ModelRequest,
    pub response: String,
}

impl From<&Exchange> for RunLogRecord {
    fn from(e: &Exchange) -> Self {
        Self {
            stage: e.role,
            key: e.key.clone(),
            backend_id: e.backend_id.clone(),
            latency_ms: e.latency.as_secs_f64() * 1e3,
            request: e.request.clone(),
            response: e.response.clone(),
        }
    }
}

/// Renders exchanges as JSON lines with sorted keys.
pub fn render_run_log(exchanges: &[Exchange]) -> String {
    let mut out = String::new();
    for e in exchanges {
        let v = serde_json::to_value(RunLogRecord::from(e)).expect("run log record serializes");
        out.push_str(&serde_json::to_string(&v).expect("value serializes"));
        out.push('\n');
    }
    out
}

/// Appends exchanges to a JSON-lines file.
pub fn append_run_log(path: &Path, exchanges: &[Exchange]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(render_run_log(exchanges).as_bytes())
}
