//! Allocation-only core of a grounded task planner.
//!
//! The crate turns a task description and an RGB-D scene into an executable
//! plan: a three-role prompting pipeline produces scene triples, a compact
//! scene summary and plan text ([`roles`]); object phrases are reduced to
//! detector classes through POS-tagged head nouns and embedding similarity
//! ([`grounding`]); detections and masks are resolved to unique instances
//! ([`perception`], [`mask`]) and lifted to grasp points ([`geometry`]);
//! plan text is parsed onto five primitives ([`plan`]) and executed in a
//! simulated world that scores success ([`exec`]).
//!
//! Everything here is `no_std` + `alloc`. File formats, HTTP clients and the
//! command-line runner live in the `groundplan` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod exec;
pub mod geometry;
pub mod grounding;
pub mod mask;
pub mod outcomes;
pub mod perception;
pub mod plan;
pub mod roles;
pub mod scene;
pub mod text;

pub use exec::{evaluate, success_rate, RunOutcome, SrReport, WorldState};
pub use geometry::{backproject, centroid, masked_cloud, GraspPoint, PointCloud};
pub use grounding::{
    classify_objects, extract_nouns, similarity, EmbeddingStore, GroundedLabelSet, NounList,
    PosTagger,
};
pub use mask::{BinaryMask, Rle};
pub use perception::{resolve_instances, BoundingBox, Detector, Segmenter, SimulatedPerception};
pub use plan::{parse_plan, validate_plan, Plan, PlanStep, Primitive};
pub use roles::{run_pipeline, ModelBackend, ModelRequest, ModelResponse, ReplayBackend};
pub use scene::{CameraIntrinsics, RgbdFrame, SceneFixture, SceneGraph, TaskDescription, Triple};
