use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::RoleId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub role: RoleId,
    pub system_prompt: String,
    pub user_prompt: String,
    pub image_digest: Option<String>,
}

impl ModelRequest {
    pub fn new(
        role: RoleId,
        system_prompt: impl Into<String>,
        user_prompt: impl Into<String>,
        image_digest: Option<&str>,
    ) -> Result<Self, BackendError> {
        let system_prompt = system_prompt.into();
        let user_prompt = user_prompt.into();
        if system_prompt.trim().is_empty() || user_prompt.trim().is_empty() {
            return Err(BackendError::EmptyPrompt(role));
        }
        Ok(Self {
            role,
            system_prompt,
            user_prompt,
            image_digest: image_digest.map(ToString::to_string),
        })
    }

    /// Replay key: hex SHA-256 over length-prefixed role, prompts and image
    /// digest.
    pub fn transcript_key(&self) -> String {
        let mut h = Sha256::new();
        let mut field = |bytes: &[u8]| {
            h.update((bytes.len() as u64).to_be_bytes());
            h.update(bytes);
        };
        field(self.role.name().as_bytes());
        field(self.system_prompt.as_bytes());
        field(self.user_prompt.as_bytes());
        match &self.image_digest {
            Some(d) => {
                field(b"\x01");
                field(d.as_bytes());
            }
            None => field(b"\x00"),
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub latency: Duration,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendError {
    #[error("{0} request has an empty prompt")]
    EmptyPrompt(RoleId),
    #[error("transcript miss for {role} request {key}")]
    TranscriptMiss { role: RoleId, key: String },
    #[error("model transport: {message}")]
    Transport { message: String, retryable: bool },
    #[error("model service returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("model backend configuration: {0}")]
    Config(String),
    #[error("model returned an empty response")]
    EmptyResponse,
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport { retryable, .. } => *retryable,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A chat model. Implementations must tolerate concurrent calls.
pub trait ModelBackend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub key: String,
    pub response: String,
}

/// Answers from a recorded transcript; never retries, never blocks.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    entries: BTreeMap<String, String>,
}

impl ReplayBackend {
    pub fn new<I: IntoIterator<Item = TranscriptEntry>>(entries: I) -> Self {
        Self {
            entries: entries.into_iter().map(|e| (e.key, e.response)).collect(),
        }
    }

    pub fn insert(&mut self, request: &ModelRequest, response: impl Into<String>) {
        self.entries
            .insert(request.transcript_key(), response.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by key.
    pub fn entries(&self) -> impl Iterator<Item = TranscriptEntry> + '_ {
        self.entries.iter().map(|(k, v)| TranscriptEntry {
            key: k.clone(),
            response: v.clone(),
        })
    }
}

impl ModelBackend for ReplayBackend {
    fn id(&self) -> &str {
        "replay"
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let key = request.transcript_key();
        let text = self.entries.get(&key).ok_or(BackendError::TranscriptMiss {
            role: request.role,
            key,
        })?;
        Ok(ModelResponse {
            text: text.clone(),
            latency: Duration::ZERO,
            backend_id: self.id().to_string(),
        })
    }
}
