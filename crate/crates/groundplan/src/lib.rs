//! File formats, model and perception clients, and the runners behind the
//! `groundplan` command.

use std::sync::OnceLock;

use groundplan_core::grounding::PosTagger;

pub mod artifacts;
pub mod bench;
pub mod eval;
pub mod fixture;
pub mod http;
pub mod run;
pub mod transcript;

pub use groundplan_core as core;

/// The shipped tagger, trained once per process.
pub fn shipped_tagger() -> &'static PosTagger {
    static TAGGER: OnceLock<PosTagger> = OnceLock::new();
    TAGGER.get_or_init(PosTagger::shipped)
}
