//! The three prompting roles (scene miner, scene summarizer, planner) over
//! a pluggable chat-model backend.

mod backend;
mod parse;
mod pipeline;

use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use backend::{
    BackendError, ModelBackend, ModelRequest, ModelResponse, ReplayBackend, TranscriptEntry,
};
pub use parse::{parse_gmk, parse_planner, parse_triples, LineWarning, TripleParse};
pub use pipeline::{
    run_gmk, run_pipeline, run_planner, run_smk, Exchange, GmkSummary, PipelineError,
    PipelineResult, Prompts, SmkOutput, StageError, StageLatencies,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RoleId {
    #[serde(rename = "SMK")]
    Smk,
    #[serde(rename = "GMK")]
    Gmk,
    #[serde(rename = "P")]
    Planner,
}

impl RoleId {
    pub const ALL: [RoleId; 3] = [RoleId::Smk, RoleId::Gmk, RoleId::Planner];

    pub fn name(self) -> &'static str {
        match self {
            RoleId::Smk => "SMK",
            RoleId::Gmk => "GMK",
            RoleId::Planner => "P",
        }
    }
}

impl fmt::Display for RoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Fills `{name}` placeholders. Unknown placeholders are left alone.
pub fn render_template(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::from(template);
    for (k, v) in values {
        out = out.replace(&alloc::format!("{{{k}}}"), v);
    }
    out
}
