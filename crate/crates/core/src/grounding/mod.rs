//! Open-vocabulary grounding: object phrases → detector classes.
//!
//! Phrases are tagged, reduced to their naming nouns, and deduplicated
//! against the classes accepted so far using embedding similarity: a new
//! object becomes a class only when its best similarity to every accepted
//! class stays below the threshold.

mod embedding;
mod nouns;
mod tagger;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embedding::{similarity_words, EmbeddingError, EmbeddingStore, Normalization, Similarity};
pub use nouns::extract_nouns;
pub use tagger::{parse_corpus, parse_lexicon, PosTagger, TaggedSentence, TaggerError};

use crate::scene::SceneGraph;
use crate::text::fold;

/// Default class-deduplication threshold.
pub const DEFAULT_TAU: f64 = 0.708;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundingError {
    #[error("object phrase is empty")]
    EmptyPhrase,
    #[error("no noun found in `{0}`")]
    NoNoun(String),
    #[error("scene graph is empty")]
    EmptyGraph,
    #[error("threshold {0} outside (0, 1)")]
    Threshold(f64),
}

/// Nouns naming one object phrase, lowercase, in phrase order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NounList {
    pub source_phrase: String,
    pub nouns: Vec<String>,
}

impl NounList {
    /// Rightmost noun of the outermost chunk; the detector class label.
    pub fn head(&self) -> &str {
        self.nouns.last().map(String::as_str).unwrap_or_default()
    }
}

/// Similarity between two noun lists. See [`similarity_words`].
pub fn similarity(
    a: &NounList,
    b: &NounList,
    store: &EmbeddingStore,
    norm: Normalization,
) -> Similarity {
    embedding::similarity(a, b, store, norm)
}

/// Deduplicated detector classes plus unique per-instance names.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundedLabelSet {
    pub classes: Vec<String>,
    /// Unique instance name → class label.
    #[serde(rename = "instances")]
    pub instance_names: BTreeMap<String, String>,
    /// Case-folded object phrase → unique instance name.
    pub aliases: BTreeMap<String, String>,
}

impl GroundedLabelSet {
    pub fn contains_class(&self, label: &str) -> bool {
        let label = fold(label);
        self.classes.iter().any(|c| fold(c) == label)
    }

    /// Instance names of one class, sorted.
    pub fn instances_of(&self, class: &str) -> Vec<&str> {
        let class = fold(class);
        self.instance_names
            .iter()
            .filter(|(_, c)| fold(c) == class)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    /// Instance name for a phrase or name, if known.
    pub fn instance_for(&self, phrase: &str) -> Option<&str> {
        let key = fold(phrase);
        if let Some(n) = self.aliases.get(&key) {
            return Some(n);
        }
        self.instance_names
            .keys()
            .find(|n| fold(n) == key)
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundingWarning {
    /// A phrase produced no noun and was left out of the class list.
    Skipped { phrase: String, reason: String },
    /// A comparison involved only out-of-vocabulary words.
    OutOfVocabulary { phrase: String, class: String },
    /// An instance name could not be attached to any class.
    UnclassifiedInstance { name: String, phrase: String },
}

/// Tunables for class deduplication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyConfig {
    pub tau: f64,
    pub normalization: Normalization,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            normalization: Normalization::FirstList,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub labels: GroundedLabelSet,
    pub warnings: Vec<GroundingWarning>,
}

struct Class {
    label: String,
    nouns: NounList,
}

/// Builds the detector class list from a scene graph.
///
/// Triples are visited in order, head before tail. An object becomes a new
/// class iff its highest similarity to the classes accepted so far is below
/// `tau` (the first object is always accepted). An object whose head noun
/// equals an existing label joins that class even when the word is out of
/// vocabulary. `instance_names` maps case-folded phrases to unique names
/// (typically from the scene summary); when absent, names are generated
/// with [`assign_instance_names`].
pub fn classify_objects(
    graph: &SceneGraph,
    store: &EmbeddingStore,
    tagger: &PosTagger,
    config: ClassifyConfig,
    instance_names: Option<&BTreeMap<String, String>>,
) -> Result<Classification, GroundingError> {
    if graph.is_empty() {
        return Err(GroundingError::EmptyGraph);
    }
    if !(config.tau > 0.0 && config.tau < 1.0) {
        return Err(GroundingError::Threshold(config.tau));
    }
    let mut warnings = Vec::new();
    let mut classes: Vec<Class> = Vec::new();
    let mut phrase_class: BTreeMap<String, usize> = BTreeMap::new();

    for triple in graph.triples() {
        for phrase in [triple.head(), triple.tail()] {
            let key = fold(phrase);
            if phrase_class.contains_key(&key) {
                continue;
            }
            let nouns = match extract_nouns(phrase, tagger) {
                Ok(n) => n,
                Err(e) => {
                    if !warnings.iter().any(|w| matches!(w, GroundingWarning::Skipped { phrase: p, .. } if fold(p) == key)) {
                        warnings.push(GroundingWarning::Skipped {
                            phrase: phrase.to_string(),
                            reason: e.to_string(),
                        });
                    }
                    continue;
                }
            };
            let idx = match best_class(&classes, &nouns, store, config, &mut warnings) {
                Some((i, score)) if score >= config.tau => i,
                _ => match classes.iter().position(|c| c.label == nouns.head()) {
                    Some(i) => i,
                    None => {
                        classes.push(Class {
                            label: nouns.head().to_string(),
                            nouns,
                        });
                        classes.len() - 1
                    }
                },
            };
            phrase_class.insert(key, idx);
        }
    }

    let generated;
    let names = match instance_names {
        Some(n) => n,
        None => {
            let (n, w) = assign_instance_names(graph, tagger, &BTreeMap::new());
            warnings.extend(w);
            generated = n;
            &generated
        }
    };

    let mut labels = GroundedLabelSet {
        classes: classes.iter().map(|c| c.label.clone()).collect(),
        ..Default::default()
    };
    // Graph phrases first so an instance takes the class of the phrase the
    // scene graph actually used; alias-only phrases are classified after.
    let mut pending = Vec::new();
    for (phrase, name) in names {
        let phrase = fold(phrase);
        match phrase_class.get(&phrase) {
            Some(&i) => {
                labels
                    .instance_names
                    .entry(name.clone())
                    .or_insert_with(|| classes[i].label.clone());
                labels.aliases.insert(phrase, name.clone());
            }
            None => pending.push((phrase, name)),
        }
    }
    for (phrase, name) in pending {
        if labels.instance_names.contains_key(name) {
            labels.aliases.insert(phrase, name.clone());
            continue;
        }
        let class = extract_nouns(&phrase, tagger).ok().and_then(|nouns| {
            if let Some(c) = classes.iter().find(|c| c.label == nouns.head()) {
                return Some(c.label.clone());
            }
            best_class(&classes, &nouns, store, config, &mut Vec::new())
                .filter(|(_, s)| *s >= config.tau)
                .map(|(i, _)| classes[i].label.clone())
        });
        match class {
            Some(c) => {
                labels.instance_names.insert(name.clone(), c);
                labels.aliases.insert(phrase, name.clone());
            }
            None => warnings.push(GroundingWarning::UnclassifiedInstance {
                name: name.clone(),
                phrase,
            }),
        }
    }
    Ok(Classification { labels, warnings })
}

fn best_class(
    classes: &[Class],
    nouns: &NounList,
    store: &EmbeddingStore,
    config: ClassifyConfig,
    warnings: &mut Vec<GroundingWarning>,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, class) in classes.iter().enumerate() {
        let s = similarity(&class.nouns, nouns, store, config.normalization);
        if s.oov {
            warnings.push(GroundingWarning::OutOfVocabulary {
                phrase: nouns.source_phrase.clone(),
                class: class.label.clone(),
            });
        }
        if best.is_none_or(|(_, b)| s.score > b) {
            best = Some((i, s.score));
        }
    }
    best
}

/// Completes a phrase → unique-name map for every object phrase in the
/// graph.
///
/// Names already in `provided` (keyed by case-folded phrase) are kept.
/// Remaining phrases are grouped by head noun: a phrase alone in its group
/// keeps its own (case-folded) text as name, otherwise phrases are named
/// `<head>_<k>` with `k` counting up in order of appearance, skipping names
/// already taken.
pub fn assign_instance_names(
    graph: &SceneGraph,
    tagger: &PosTagger,
    provided: &BTreeMap<String, String>,
) -> (BTreeMap<String, String>, Vec<GroundingWarning>) {
    let mut names: BTreeMap<String, String> = provided
        .iter()
        .map(|(p, n)| (fold(p), n.trim().to_string()))
        .collect();
    let mut warnings = Vec::new();
    let mut taken: Vec<String> = names.values().map(|n| fold(n)).collect();

    // head noun → phrases, in first-appearance order
    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    for phrase in graph.object_phrases() {
        let key = fold(phrase);
        if names.contains_key(&key) {
            continue;
        }
        let head = match extract_nouns(phrase, tagger) {
            Ok(n) => n.head().to_string(),
            Err(e) => {
                warnings.push(GroundingWarning::Skipped {
                    phrase: phrase.to_string(),
                    reason: e.to_string(),
                });
                key.clone()
            }
        };
        match groups.iter_mut().find(|(h, _)| *h == head) {
            Some((_, members)) => members.push(key),
            None => groups.push((head, alloc::vec![key])),
        }
    }

    for (head, members) in groups {
        if let [only] = members.as_slice() {
            if !taken.contains(only) {
                taken.push(only.clone());
                names.insert(only.clone(), only.clone());
                continue;
            }
        }
        let mut k = 1usize;
        for phrase in members {
            let name = loop {
                let candidate = alloc::format!("{head}_{k}");
                k += 1;
                if !taken.contains(&candidate) {
                    break candidate;
                }
            };
            taken.push(name.clone());
            names.insert(phrase, name);
        }
    }
    (names, warnings)
}
