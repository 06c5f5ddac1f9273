//! Detector and segmenter contracts, and a simulated backend that replays
//! fixture ground truth.

mod resolve;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grounding::GroundedLabelSet;
use crate::mask::BinaryMask;
use crate::scene::{RgbdFrame, SceneFixture, SceneGraph, SceneObject};
use crate::text::fold;

pub use resolve::{resolve_instances, SpatialRelation, RELATION_MARGIN_PX};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceptionError {
    #[error("class set is empty")]
    EmptyClasses,
    #[error("fixture carries no ground-truth objects")]
    NoGroundTruth,
    #[error("no ground-truth mask for {label} box {bbox:?}")]
    MissingMask { label: String, bbox: [u32; 4] },
    #[error("box {bbox:?} outside {width}x{height} frame")]
    OutOfBounds {
        bbox: [u32; 4],
        width: u32,
        height: u32,
    },
    #[error("score {0} outside [0, 1]")]
    Score(f64),
    #[error("box label {0:?} is not a grounded class")]
    UnknownLabel(String),
    #[error("inconsistent scene graph: {}", .violated.join("; "))]
    Inconsistent { violated: Vec<String> },
    #[error("perception service: {message}")]
    Transport { message: String, retryable: bool },
}

impl PerceptionError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Self::Transport {
                retryable: true,
                ..
            }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub u0: u32,
    pub v0: u32,
    pub u1: u32,
    pub v1: u32,
    pub label: String,
    pub score: f64,
}

impl BoundingBox {
    pub fn new(bbox: [u32; 4], label: impl Into<String>, score: f64) -> Self {
        let [u0, v0, u1, v1] = bbox;
        Self {
            u0,
            v0,
            u1,
            v1,
            label: label.into(),
            score,
        }
    }

    pub fn corners(&self) -> [u32; 4] {
        [self.u0, self.v0, self.u1, self.v1]
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (f64::from(self.u0) + f64::from(self.u1)) / 2.0,
            (f64::from(self.v0) + f64::from(self.v1)) / 2.0,
        )
    }

    pub fn validate(&self, width: u32, height: u32) -> Result<(), PerceptionError> {
        if !(self.u0 < self.u1 && self.u1 <= width && self.v0 < self.v1 && self.v1 <= height) {
            return Err(PerceptionError::OutOfBounds {
                bbox: self.corners(),
                width,
                height,
            });
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(PerceptionError::Score(self.score));
        }
        Ok(())
    }
}

pub trait Detector: Send + Sync {
    /// Boxes for the given classes, sorted by descending score.
    fn detect(
        &self,
        frame: &RgbdFrame,
        classes: &GroundedLabelSet,
    ) -> Result<Vec<BoundingBox>, PerceptionError>;
}

pub trait Segmenter: Send + Sync {
    /// Foreground mask inside `bbox`. The instance name is left unset.
    fn segment(&self, frame: &RgbdFrame, bbox: &BoundingBox)
        -> Result<BinaryMask, PerceptionError>;
}

/// Replays the boxes and masks stored in a scene fixture.
#[derive(Debug, Clone)]
pub struct SimulatedPerception {
    objects: Option<Vec<SceneObject>>,
}

impl SimulatedPerception {
    pub fn new(fixture: &SceneFixture) -> Self {
        Self {
            objects: fixture.objects.clone(),
        }
    }

    fn objects(&self) -> Result<&[SceneObject], PerceptionError> {
        self.objects
            .as_deref()
            .ok_or(PerceptionError::NoGroundTruth)
    }
}

/// Descending score, then ascending `(v0, u0)` for a stable order.
pub fn sort_boxes(boxes: &mut [BoundingBox]) {
    boxes.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then((a.v0, a.u0).cmp(&(b.v0, b.u0)))
            .then_with(|| a.label.cmp(&b.label))
    });
}

impl Detector for SimulatedPerception {
    fn detect(
        &self,
        _frame: &RgbdFrame,
        classes: &GroundedLabelSet,
    ) -> Result<Vec<BoundingBox>, PerceptionError> {
        if classes.classes.is_empty() {
            return Err(PerceptionError::EmptyClasses);
        }
        let mut boxes: Vec<BoundingBox> = self
            .objects()?
            .iter()
            .filter_map(|o| {
                let label = classes.classes.iter().find(|c| fold(c) == fold(&o.class))?;
                Some(BoundingBox::new(o.bbox, label.clone(), o.score))
            })
            .collect();
        sort_boxes(&mut boxes);
        Ok(boxes)
    }
}

impl Segmenter for SimulatedPerception {
    fn segment(
        &self,
        frame: &RgbdFrame,
        bbox: &BoundingBox,
    ) -> Result<BinaryMask, PerceptionError> {
        bbox.validate(frame.width(), frame.height())?;
        let object = self
            .objects()?
            .iter()
            .find(|o| o.bbox == bbox.corners() && fold(&o.class) == fold(&bbox.label))
            .ok_or_else(|| PerceptionError::MissingMask {
                label: bbox.label.clone(),
                bbox: bbox.corners(),
            })?;
        Ok(BinaryMask {
            rle: object.mask.clone(),
            label: bbox.label.clone(),
            instance_name: None,
        })
    }
}

/// Boxes, their masks and resolved instance names, index aligned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detections {
    pub boxes: Vec<BoundingBox>,
    pub masks: Vec<BinaryMask>,
}

/// detect, segment every box, then name instances from the scene graph.
pub fn perceive(
    frame: &RgbdFrame,
    graph: &SceneGraph,
    labels: &GroundedLabelSet,
    detector: &dyn Detector,
    segmenter: &dyn Segmenter,
) -> Result<Detections, PerceptionError> {
    let boxes = detector.detect(frame, labels)?;
    for b in &boxes {
        b.validate(frame.width(), frame.height())?;
    }
    let names = resolve_instances(&boxes, graph, labels)?;
    let mut masks = Vec::with_capacity(boxes.len());
    for (b, name) in boxes.iter().zip(names) {
        let mut mask = segmenter.segment(frame, b)?;
        if !mask.rle.within_box(b.corners()) || mask.rle.count_ones() == 0 {
            return Err(PerceptionError::MissingMask {
                label: b.label.to_string(),
                bbox: b.corners(),
            });
        }
        mask.instance_name = Some(name);
        masks.push(mask);
    }
    Ok(Detections { boxes, masks })
}
