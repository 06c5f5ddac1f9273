//! Scene fixture files: JSON with a base64 16-bit PGM (or inline) depth map
//! and optional ground-truth objects.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use groundplan_core::exec::{GoalAtom, Region};
use groundplan_core::scene::{
    CameraIntrinsics, RgbdFrame, SceneError, SceneFixture, SceneObject, TaskDescription,
    DEFAULT_DISPLACEMENT_MM,
};
use groundplan_core::Rle;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("depth map: {0}")]
    Depth(String),
    #[error("object {name}: {reason}")]
    Object { name: String, reason: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl FixtureError {
    /// Missing or unreadable file, as opposed to invalid content.
    pub fn is_io(&self) -> bool {
        matches!(self, FixtureError::Io { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "kebab-case")]
pub enum DepthData {
    /// Base64 of a binary PGM (`P5`, maxval 65535, big-endian samples).
    #[serde(rename = "pgm16-base64")]
    Pgm16 { data: String },
    /// Row-major millimeters.
    Inline { values: Vec<u16> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectFile {
    pub name: String,
    pub class: String,
    pub bbox: [u32; 4],
    /// Run lengths over the full frame, background first.
    pub mask: Vec<u32>,
    pub centroid_mm: [f64; 3],
    #[serde(default = "one")]
    pub score: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub fixed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, f64>,
}

fn one() -> f64 {
    1.0
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn default_displacement() -> f64 {
    DEFAULT_DISPLACEMENT_MM
}

/// On-disk layout of a scene fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    pub camera: CameraIntrinsics,
    pub rgb_digest: String,
    pub depth: DepthData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<Vec<ObjectFile>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub goal: Vec<GoalAtom>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub regions: BTreeMap<String, Region>,
    #[serde(default = "default_displacement")]
    pub push_mm: f64,
    #[serde(default = "default_displacement")]
    pub pull_mm: f64,
}

/// A validated fixture plus its descriptive fields.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedFixture {
    pub scene: SceneFixture,
    pub task_id: Option<String>,
    pub task: Option<TaskDescription>,
    pub provenance: Option<String>,
}

pub fn encode_pgm16(width: u32, height: u32, depth: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(depth.len() * 2);
    for d in depth {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out
}

/// Parses a binary 16-bit PGM. Comments (`#` to end of line) are allowed
/// in the header.
pub fn decode_pgm16(bytes: &[u8]) -> Result<(u32, u32, Vec<u16>), FixtureError> {
    let bad = |m: &str| FixtureError::Depth(m.to_string());
    let mut fields = Vec::with_capacity(4);
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(bad("truncated PGM header"));
        }
        fields
            .push(std::str::from_utf8(&bytes[start..i]).map_err(|_| bad("non-ASCII PGM header"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let num = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| bad("malformed PGM header number"))
    };
    let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 65535 {
        return Err(bad("PGM maxval must be 65535"));
    }
    if i >= bytes.len() {
        return Err(bad("PGM header without payload"));
    }
    let data = &bytes[i + 1..];
    let expected = w as usize * h as usize * 2;
    if data.len() != expected {
        return Err(FixtureError::Depth(format!(
            "PGM payload has {} bytes, expected {expected}",
            data.len()
        )));
    }
    let depth = data
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((w, h, depth))
}

impl DepthData {
    pub fn pgm16(width: u32, height: u32, depth: &[u16]) -> Self {
        DepthData::Pgm16 {
            data: STANDARD.encode(encode_pgm16(width, height, depth)),
        }
    }

    pub fn decode(&self, camera: &CameraIntrinsics) -> Result<Vec<u16>, FixtureError> {
        match self {
            DepthData::Inline { values } => Ok(values.clone()),
            DepthData::Pgm16 { data } => {
                let bytes = STANDARD
                    .decode(data.trim())
                    .map_err(|e| FixtureError::Depth(format!("base64: {e}")))?;
                let (w, h, depth) = decode_pgm16(&bytes)?;
                if (w, h) != (camera.width, camera.height) {
                    return Err(FixtureError::Depth(format!(
                        "PGM is {w}x{h}, camera is {}x{}",
                        camera.width, camera.height
                    )));
                }
                Ok(depth)
            }
        }
    }
}

impl FixtureFile {
    pub fn into_fixture(self) -> Result<LoadedFixture, FixtureError> {
        self.camera.validate()?;
        let depth = self.depth.decode(&self.camera)?;
        let frame = RgbdFrame::new(self.rgb_digest, depth, self.camera)?;
        let objects = self
            .objects
            .map(|objs| {
                objs.into_iter()
                    .map(|o| {
                        let mask = Rle::from_counts(frame.width(), frame.height(), o.mask)
                            .map_err(|e| FixtureError::Object {
                                name: o.name.clone(),
                                reason: e.to_string(),
                            })?;
                        Ok(SceneObject {
                            name: o.name,
                            class: o.class,
                            bbox: o.bbox,
                            mask,
                            centroid_mm: o.centroid_mm,
                            score: o.score,
                            fixed: o.fixed,
                            container: o.container,
                            attributes: o.attributes,
                        })
                    })
                    .collect::<Result<Vec<_>, FixtureError>>()
            })
            .transpose()?;
        let scene = SceneFixture {
            frame,
            objects,
            goal: self.goal,
            regions: self.regions,
            push_mm: self.push_mm,
            pull_mm: self.pull_mm,
        };
        scene.validate()?;
        let task = self.task.map(TaskDescription::new).transpose()?;
        Ok(LoadedFixture {
            scene,
            task_id: self.task_id,
            task,
            provenance: self.provenance,
        })
    }

    pub fn from_fixture(fixture: &LoadedFixture) -> Self {
        let scene = &fixture.scene;
        let k = *scene.frame.intrinsics();
        FixtureFile {
            provenance: fixture.provenance.clone(),
            task_id: fixture.task_id.clone(),
            task: fixture.task.as_ref().map(|t| t.as_str().to_string()),
            camera: k,
            rgb_digest: scene.frame.rgb_digest().to_string(),
            depth: DepthData::pgm16(k.width, k.height, scene.frame.depth()),
            objects: scene.objects.as_ref().map(|objs| {
                objs.iter()
                    .map(|o| ObjectFile {
                        name: o.name.clone(),
                        class: o.class.clone(),
                        bbox: o.bbox,
                        mask: o.mask.counts().to_vec(),
                        centroid_mm: o.centroid_mm,
                        score: o.score,
                        fixed: o.fixed,
                        container: o.container.clone(),
                        attributes: o.attributes.clone(),
                    })
                    .collect()
            }),
            goal: scene.goal.clone(),
            regions: scene.regions.clone(),
            push_mm: scene.push_mm,
            pull_mm: scene.pull_mm,
        }
    }
}

pub fn parse_fixture(text: &str) -> Result<LoadedFixture, FixtureError> {
    let file: FixtureFile = serde_json::from_str(text).map_err(|e| FixtureError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.into_fixture()
}

pub fn load_fixture(path: &Path) -> Result<LoadedFixture, FixtureError> {
    let text = fs::read_to_string(path).map_err(|source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_fixture(&text)
}

pub fn fixture_to_json(fixture: &LoadedFixture) -> String {
    crate::artifacts::canonical_json(&FixtureFile::from_fixture(fixture))
        .expect("fixture serializes")
}
