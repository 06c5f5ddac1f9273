//! HTTP clients: an OpenAI-compatible chat backend and detector/segmenter
//! services speaking multipart in, JSON out.

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use groundplan_core::grounding::GroundedLabelSet;
use groundplan_core::perception::{sort_boxes, BoundingBox, Detector, PerceptionError, Segmenter};
use groundplan_core::roles::{BackendError, ModelBackend, ModelRequest, ModelResponse, RoleId};
use groundplan_core::scene::RgbdFrame;
use groundplan_core::{BinaryMask, Rle};
use serde::Deserialize;
use serde_json::{json, Value};
use ureq::unversioned::multipart::{Form, Part};

pub const ENV_API_KEY: &str = "MODEL_API_KEY";
pub const ENV_ENDPOINT: &str = "MODEL_ENDPOINT";

#[derive(Debug, Clone, PartialEq)]
pub struct ChatConfig {
    /// Full URL of the chat completions route.
    pub endpoint: String,
    pub api_key: Option<String>,
    /// Vision-capable model for the scene roles.
    pub vision_model: String,
    pub text_model: String,
    pub timeout: Duration,
    /// Extra attempts after a retryable failure.
    pub retries: u32,
    pub backoff: Duration,
    /// `{digest}` is replaced by the frame's RGB digest to form an image URL.
    pub image_url_template: Option<String>,
    pub seed: Option<u64>,
}

impl ChatConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            vision_model: "gpt-4-vision-preview".into(),
            text_model: "gpt-4".into(),
            timeout: Duration::from_secs(120),
            retries: 2,
            backoff: Duration::from_millis(500),
            image_url_template: None,
            seed: None,
        }
    }

    /// Endpoint from `MODEL_ENDPOINT`, key from `MODEL_API_KEY`.
    pub fn from_env() -> Result<Self, BackendError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| BackendError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let mut c = Self::new(endpoint);
        c.api_key = std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty());
        Ok(c)
    }

    pub fn model_for(&self, role: RoleId) -> &str {
        match role {
            RoleId::Smk | RoleId::Gmk => &self.vision_model,
            RoleId::Planner => &self.text_model,
        }
    }
}

pub struct ChatBackend {
    config: ChatConfig,
    agent: ureq::Agent,
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .new_agent()
}

fn transport(e: ureq::Error) -> BackendError {
    let retryable = matches!(
        e,
        ureq::Error::Io(_)
            | ureq::Error::Timeout(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
    );
    BackendError::Transport {
        message: e.to_string(),
        retryable,
    }
}

/// Runs `attempt` up to `1 + retries` times, doubling the pause after each
/// retryable failure.
pub fn with_retries<T, E, F>(
    retries: u32,
    backoff: Duration,
    retryable: impl Fn(&E) -> bool,
    mut attempt: F,
) -> Result<T, E>
where
    F: FnMut() -> Result<T, E>,
{
    let mut pause = backoff;
    let mut n = 0;
    loop {
        match attempt() {
            Err(e) if n < retries && retryable(&e) => {
                thread::sleep(pause);
                pause *= 2;
                n += 1;
            }
            other => return other,
        }
    }
}

impl ChatBackend {
    pub fn new(config: ChatConfig) -> Self {
        let agent = agent(config.timeout);
        Self { config, agent }
    }

    pub fn body(&self, request: &ModelRequest) -> Value {
        let user = match (&request.image_digest, &self.config.image_url_template) {
            (Some(d), Some(t)) => json!([
                {"type": "text", "text": request.user_prompt},
                {"type": "image_url", "image_url": {"url": t.replace("{digest}", d)}},
            ]),
            _ => json!(request.user_prompt),
        };
        let mut body = json!({
            "model": self.config.model_for(request.role),
            "temperature": 0,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": user},
            ],
        });
        if let Some(seed) = self.config.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn once(&self, body: &Value) -> Result<String, BackendError> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(k) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req.send_json(body).map_err(transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport)?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Status { status, body: text });
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| BackendError::Transport {
            message: format!("bad JSON: {e}"),
            retryable: false,
        })?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .unwrap_or_default();
        if content.trim().is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(content.to_string())
    }
}

impl ModelBackend for ChatBackend {
    fn id(&self) -> &str {
        "live"
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, BackendError> {
        let body = self.body(request);
        let start = Instant::now();
        let text = with_retries(
            self.config.retries,
            self.config.backoff,
            BackendError::is_retryable,
            || self.once(&body),
        )?;
        Ok(ModelResponse {
            text,
            latency: start.elapsed(),
            backend_id: self.id().into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retries: u32,
    pub backoff: Duration,
}

impl ServiceConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key: None,
            timeout: Duration::from_secs(30),
            retries: 2,
            backoff: Duration::from_millis(200),
        }
    }
}

fn service_error(e: ureq::Error) -> PerceptionError {
    match transport(e) {
        BackendError::Transport { message, retryable } => {
            PerceptionError::Transport { message, retryable }
        }
        other => PerceptionError::Transport {
            message: other.to_string(),
            retryable: false,
        },
    }
}

struct Service {
    config: ServiceConfig,
    agent: ureq::Agent,
    image: Option<Arc<Vec<u8>>>,
}

impl Service {
    fn new(config: ServiceConfig, image: Option<Arc<Vec<u8>>>) -> Self {
        let agent = agent(config.timeout);
        Self {
            config,
            agent,
            image,
        }
    }

    fn post<T: for<'de> Deserialize<'de>>(
        &self,
        fields: &[(&str, String)],
    ) -> Result<T, PerceptionError> {
        with_retries(
            self.config.retries,
            self.config.backoff,
            PerceptionError::is_retryable,
            || {
                let mut form = Form::new();
                for (k, v) in fields {
                    form = form.text(k, v);
                }
                if let Some(img) = &self.image {
                    form = form.part(
                        "image",
                        Part::bytes(img)
                            .file_name("frame.png")
                            .mime_str("image/png")
                            .map_err(service_error)?,
                    );
                }
                let mut req = self.agent.post(&self.config.url);
                if let Some(k) = &self.config.api_key {
                    req = req.header("Authorization", &format!("Bearer {k}"));
                }
                let mut resp = req.send(form).map_err(service_error)?;
                let status = resp.status().as_u16();
                let text = resp.body_mut().read_to_string().map_err(service_error)?;
                if !(200..300).contains(&status) {
                    return Err(PerceptionError::Transport {
                        message: format!("status {status}: {text}"),
                        retryable: status == 429 || status >= 500,
                    });
                }
                serde_json::from_str(&text).map_err(|e| PerceptionError::Transport {
                    message: format!("bad JSON: {e}"),
                    retryable: false,
                })
            },
        )
    }
}

/// Open-vocabulary detector behind an HTTP endpoint. Request fields:
/// `rgb_digest`, `classes` (JSON list) and the optional `image` file.
/// Response: `{"boxes": [{u0, v0, u1, v1, label, score}]}`.
pub struct HttpDetector(Service);

impl HttpDetector {
    pub fn new(config: ServiceConfig, image: Option<Arc<Vec<u8>>>) -> Self {
        Self(Service::new(config, image))
    }
}

#[derive(Deserialize)]
struct BoxesResponse {
    boxes: Vec<BoundingBox>,
}

impl Detector for HttpDetector {
    fn detect(
        &self,
        frame: &RgbdFrame,
        classes: &GroundedLabelSet,
    ) -> Result<Vec<BoundingBox>, PerceptionError> {
        if classes.classes.is_empty() {
            return Err(PerceptionError::EmptyClasses);
        }
        let fields = [
            ("rgb_digest", frame.rgb_digest().to_string()),
            (
                "classes",
                serde_json::to_string(&classes.classes).expect("strings serialize"),
            ),
        ];
        let mut boxes = self.0.post::<BoxesResponse>(&fields)?.boxes;
        for b in &boxes {
            b.validate(frame.width(), frame.height())?;
            if !classes.contains_class(&b.label) {
                return Err(PerceptionError::UnknownLabel(b.label.clone()));
            }
        }
        sort_boxes(&mut boxes);
        Ok(boxes)
    }
}

/// Box-prompted segmenter behind an HTTP endpoint. Request fields:
/// `rgb_digest`, `box` (JSON) and the optional `image` file. Response:
/// `{"counts": [...]}` run lengths over the full frame.
pub struct HttpSegmenter(Service);

impl HttpSegmenter {
    pub fn new(config: ServiceConfig, image: Option<Arc<Vec<u8>>>) -> Self {
        Self(Service::new(config, image))
    }
}

#[derive(Deserialize)]
struct MaskResponse {
    counts: Vec<u32>,
}

impl Segmenter for HttpSegmenter {
    fn segment(
        &self,
        frame: &RgbdFrame,
        bbox: &BoundingBox,
    ) -> Result<BinaryMask, PerceptionError> {
        bbox.validate(frame.width(), frame.height())?;
        let fields = [
            ("rgb_digest", frame.rgb_digest().to_string()),
            ("box", serde_json::to_string(bbox).expect("box serializes")),
        ];
        let counts = self.0.post::<MaskResponse>(&fields)?.counts;
        let rle = Rle::from_counts(frame.width(), frame.height(), counts).map_err(|e| {
            PerceptionError::Transport {
                message: format!("mask: {e}"),
                retryable: false,
            }
        })?;
        if !rle.within_box(bbox.corners()) || rle.count_ones() == 0 {
            return Err(PerceptionError::MissingMask {
                label: bbox.label.clone(),
                bbox: bbox.corners(),
            });
        }
        Ok(BinaryMask {
            rle,
            label: bbox.label.clone(),
            instance_name: None,
        })
    }
}
