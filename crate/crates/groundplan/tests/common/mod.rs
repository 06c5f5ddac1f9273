#![allow(dead_code)]

use std::path::{Path, PathBuf};

use groundplan::run::RunOptions;

pub const TASKS: [&str; 6] = [
    "recycle",
    "order_by_height",
    "shelf_number",
    "shelf_material",
    "jacket",
    "exit",
];

pub fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/v1")
}

pub fn scene(id: &str) -> PathBuf {
    root().join(format!("scenes/{id}.json"))
}

pub fn transcript(id: &str) -> PathBuf {
    root().join(format!("transcripts/{id}.json"))
}

pub fn embeddings() -> PathBuf {
    root().join("embeddings/toy.txt")
}

pub fn options(id: &str) -> RunOptions {
    let mut o = RunOptions::new(embeddings());
    o.transcript = Some(transcript(id));
    o
}
