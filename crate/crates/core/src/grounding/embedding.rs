//! Word vectors in word2vec text format and the noun-list similarity score.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::NounList;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("`{word}` has {actual} components, expected {expected}")]
    Dimension {
        word: String,
        expected: usize,
        actual: usize,
    },
    #[error("`{0}` has a zero-norm or non-finite vector")]
    Degenerate(String),
    #[error("header declares {declared} vectors, file has {actual}")]
    Count { declared: usize, actual: usize },
    #[error("embedding file is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    vector: Vec<f64>,
    norm: f64,
}

/// Immutable word → vector table. All vectors share one dimension and
/// none has zero norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    vectors: BTreeMap<String, Entry>,
}

impl EmbeddingStore {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            vectors: BTreeMap::new(),
        }
    }

    /// Adds or replaces a word. Words are stored lowercase.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<(), EmbeddingError> {
        if vector.len() != self.dimension {
            return Err(EmbeddingError::Dimension {
                word: word.to_string(),
                expected: self.dimension,
                actual: vector.len(),
            });
        }
        let norm = libm::sqrt(vector.iter().map(|x| x * x).sum::<f64>());
        if !(norm.is_finite() && norm > 0.0) {
            return Err(EmbeddingError::Degenerate(word.to_string()));
        }
        self.vectors
            .insert(word.to_lowercase(), Entry { vector, norm });
        Ok(())
    }

    /// Parses the word2vec text format: an optional `count dim` header
    /// followed by `word v1 ... vD` lines.
    pub fn parse_word2vec(text: &str) -> Result<Self, EmbeddingError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .peekable();
        let mut declared = None;
        if let Some(&(_, first)) = lines.peek() {
            let parts: Vec<&str> = first.split_whitespace().collect();
            if let [count, dim] = parts[..] {
                if let (Ok(c), Ok(d)) = (count.parse::<usize>(), dim.parse::<usize>()) {
                    declared = Some((c, d));
                    lines.next();
                }
            }
        }
        let mut store: Option<Self> = declared.map(|(_, d)| Self::new(d));
        for (line, content) in lines {
            let mut parts = content.split_whitespace();
            let word = parts.next().expect("non-empty line");
            let vector = parts
                .map(|p| p.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbeddingError::Parse {
                    line,
                    reason: alloc::format!("bad component for `{word}`: {e}"),
                })?;
            if vector.is_empty() {
                return Err(EmbeddingError::Parse {
                    line,
                    reason: alloc::format!("`{word}` has no components"),
                });
            }
            let store = store.get_or_insert_with(|| Self::new(vector.len()));
            store.insert(word, vector)?;
        }
        let store = store.ok_or(EmbeddingError::Empty)?;
        if let Some((count, _)) = declared {
            if count != store.len() {
                return Err(EmbeddingError::Count {
                    declared: count,
                    actual: store.len(),
                });
            }
        }
        Ok(store)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vectors.contains_key(&word.to_lowercase())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors
            .get(&word.to_lowercase())
            .map(|e| e.vector.as_slice())
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    /// Cosine of two in-vocabulary words; `None` when either is missing.
    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let a = self.vectors.get(&a.to_lowercase())?;
        let b = self.vectors.get(&b.to_lowercase())?;
        let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
        Some(dot / (a.norm * b.norm))
    }

    /// Renders the store back to word2vec text format with a header.
    pub fn to_word2vec(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.len(), self.dimension);
        for (word, e) in &self.vectors {
            out.push_str(word);
            for x in &e.vector {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }
}

/// How the double sum over word pairs is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the length of the first list only. Not symmetric.
    #[default]
    FirstList,
    /// Divide by the product of both lengths. Symmetric.
    BothLists,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub score: f64,
    /// Set when no word pair had both words in the vocabulary.
    pub oov: bool,
}

/// Noun-list similarity: `(1/N) * sum_i sum_j cos(w_i, w_j)` with `N` the
/// length of `a` (or `N * M` under [`Normalization::BothLists`]). Pairs with
/// an out-of-vocabulary word contribute 0.
pub fn similarity(
    a: &NounList,
    b: &NounList,
    store: &EmbeddingStore,
    norm: Normalization,
) -> Similarity {
    similarity_words(&a.nouns, &b.nouns, store, norm)
}

/// [`similarity`] over bare word lists.
pub fn similarity_words<A: AsRef<str>, B: AsRef<str>>(
    a: &[A],
    b: &[B],
    store: &EmbeddingStore,
    norm: Normalization,
) -> Similarity {
    if a.is_empty() || b.is_empty() {
        return Similarity {
            score: 0.0,
            oov: true,
        };
    }
    let mut sum = 0.0;
    let mut any_known = false;
    for wi in a {
        for wj in b {
            if let Some(c) = store.cosine(wi.as_ref(), wj.as_ref()) {
                sum += c;
                any_known = true;
            }
        }
    }
    let denom = match norm {
        Normalization::FirstList => a.len() as f64,
        Normalization::BothLists => (a.len() * b.len()) as f64,
    };
    Similarity {
        score: sum / denom,
        oov: !any_known,
    }
}
