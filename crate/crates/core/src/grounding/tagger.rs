//! Averaged-perceptron part-of-speech tagger (Penn tags).
//!
//! The feature set and update rule follow the classic greedy
//! averaged-perceptron tagger: each token is tagged left to right from
//! word, affix and previous-tag features, and weights are averaged over
//! every update step at the end of training. Frequent unambiguous words and
//! a closed-class lexicon bypass the model.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

const START: [&str; 2] = ["-START-", "-START2-"];
const END: [&str; 2] = ["-END-", "-END2-"];

const SHIPPED_CORPUS: &str = include_str!("../../assets/tagger/corpus.txt");
const SHIPPED_LEXICON: &str = include_str!("../../assets/tagger/lexicon.txt");
const SHIPPED_ITERATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaggerError {
    #[error("corpus line {line}: token `{token}` is not word/TAG")]
    Token { line: usize, token: String },
    #[error("lexicon line {line}: expected `word TAG`")]
    Lexicon { line: usize },
    #[error("training corpus is empty")]
    EmptyCorpus,
}

pub type TaggedSentence = Vec<(String, String)>;

#[derive(Debug, Clone, Default)]
struct Perceptron {
    weights: BTreeMap<String, BTreeMap<String, f64>>,
    totals: BTreeMap<(String, String), f64>,
    stamps: BTreeMap<(String, String), u64>,
    classes: Vec<String>,
    instances: u64,
}

impl Perceptron {
    fn predict(&self, features: &BTreeMap<String, u32>) -> String {
        let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
        for (feat, &value) in features {
            if let Some(weights) = self.weights.get(feat) {
                for (label, w) in weights {
                    *scores.entry(label.as_str()).or_insert(0.0) += f64::from(value) * w;
                }
            }
        }
        // Ties break toward the lexicographically largest tag.
        self.classes
            .iter()
            .map(|c| (scores.get(c.as_str()).copied().unwrap_or(0.0), c))
            .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)))
            .map(|(_, c)| c.clone())
            .unwrap_or_else(|| "NN".to_string())
    }

    fn update(&mut self, truth: &str, guess: &str, features: &BTreeMap<String, u32>) {
        self.instances += 1;
        if truth == guess {
            return;
        }
        for feat in features.keys() {
            self.bump(feat, truth, 1.0);
            self.bump(feat, guess, -1.0);
        }
    }

    fn bump(&mut self, feat: &str, class: &str, delta: f64) {
        let current = self
            .weights
            .get(feat)
            .and_then(|w| w.get(class))
            .copied()
            .unwrap_or(0.0);
        let key = (feat.to_string(), class.to_string());
        let stamp = self.stamps.get(&key).copied().unwrap_or(0);
        *self.totals.entry(key.clone()).or_insert(0.0) += (self.instances - stamp) as f64 * current;
        self.stamps.insert(key, self.instances);
        self.weights
            .entry(feat.to_string())
            .or_default()
            .insert(class.to_string(), current + delta);
    }

    fn average(&mut self) {
        let n = self.instances.max(1) as f64;
        for (feat, weights) in &mut self.weights {
            let mut averaged = BTreeMap::new();
            for (class, &w) in weights.iter() {
                let key = (feat.clone(), class.clone());
                let total = self.totals.get(&key).copied().unwrap_or(0.0)
                    + (self.instances - self.stamps.get(&key).copied().unwrap_or(0)) as f64 * w;
                let avg = libm::round(total / n * 1000.0) / 1000.0;
                if avg != 0.0 {
                    averaged.insert(class.clone(), avg);
                }
            }
            *weights = averaged;
        }
        self.weights.retain(|_, w| !w.is_empty());
        self.totals.clear();
        self.stamps.clear();
    }
}

/// Greedy averaged-perceptron POS tagger.
#[derive(Debug, Clone)]
pub struct PosTagger {
    model: Perceptron,
    tagdict: BTreeMap<String, String>,
}

impl PosTagger {
    /// Trains the shipped model from the bundled tagged corpus and lexicon.
    /// Training is deterministic, so every call yields the same tagger.
    pub fn shipped() -> Self {
        let corpus = parse_corpus(SHIPPED_CORPUS).expect("bundled corpus is well-formed");
        let lexicon = parse_lexicon(SHIPPED_LEXICON).expect("bundled lexicon is well-formed");
        Self::train(&corpus, &lexicon, SHIPPED_ITERATIONS).expect("bundled corpus is non-empty")
    }

    /// Trains a tagger. `lexicon` entries override both the learned tag
    /// dictionary and the model.
    pub fn train(
        corpus: &[TaggedSentence],
        lexicon: &BTreeMap<String, String>,
        iterations: usize,
    ) -> Result<Self, TaggerError> {
        if corpus.iter().all(Vec::is_empty) {
            return Err(TaggerError::EmptyCorpus);
        }
        let mut tagger = Self {
            model: Perceptron::default(),
            tagdict: make_tagdict(corpus),
        };
        tagger
            .tagdict
            .extend(lexicon.iter().map(|(w, t)| (w.clone(), t.clone())));
        let mut classes: Vec<String> = corpus.iter().flatten().map(|(_, t)| t.clone()).collect();
        classes.sort();
        classes.dedup();
        tagger.model.classes = classes;

        let mut order: Vec<usize> = (0..corpus.len()).collect();
        let mut rng = XorShift(0x9E37_79B9_7F4A_7C15);
        for _ in 0..iterations {
            for &s in &order {
                let sentence = &corpus[s];
                let words: Vec<&str> = sentence.iter().map(|(w, _)| w.as_str()).collect();
                let context = build_context(&words);
                let (mut prev, mut prev2) = (START[0].to_string(), START[1].to_string());
                for (i, (word, truth)) in sentence.iter().enumerate() {
                    let guess = match tagger.tagdict.get(&word.to_lowercase()) {
                        Some(t) => t.clone(),
                        None => {
                            let feats = features(i, word, &context, &prev, &prev2);
                            let guess = tagger.model.predict(&feats);
                            tagger.model.update(truth, &guess, &feats);
                            guess
                        }
                    };
                    prev2 = core::mem::replace(&mut prev, guess);
                }
            }
            rng.shuffle(&mut order);
        }
        tagger.model.average();
        Ok(tagger)
    }

    /// Tags a tokenized sentence.
    pub fn tag<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<String> {
        let words: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
        let context = build_context(&words);
        let (mut prev, mut prev2) = (START[0].to_string(), START[1].to_string());
        let mut out = Vec::with_capacity(words.len());
        for (i, word) in words.iter().enumerate() {
            let tag = match self.tagdict.get(&word.to_lowercase()) {
                Some(t) => t.clone(),
                None => self
                    .model
                    .predict(&features(i, word, &context, &prev, &prev2)),
            };
            prev2 = core::mem::replace(&mut prev, tag.clone());
            out.push(tag);
        }
        out
    }

    /// Tags seen by the model during training.
    pub fn classes(&self) -> &[String] {
        &self.model.classes
    }
}

/// Parses `word/TAG word/TAG ...` lines; `#` starts a comment line.
pub fn parse_corpus(text: &str) -> Result<Vec<TaggedSentence>, TaggerError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut sentence = Vec::new();
        for token in line.split_whitespace() {
            match token.rsplit_once('/') {
                Some((w, t)) if !w.is_empty() && !t.is_empty() => {
                    sentence.push((w.to_string(), t.to_string()));
                }
                _ => {
                    return Err(TaggerError::Token {
                        line: i + 1,
                        token: token.to_string(),
                    })
                }
            }
        }
        out.push(sentence);
    }
    Ok(out)
}

/// Parses `word TAG` lines into a lexicon.
pub fn parse_lexicon(text: &str) -> Result<BTreeMap<String, String>, TaggerError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [word, tag] = parts[..] else {
            return Err(TaggerError::Lexicon { line: i + 1 });
        };
        out.insert(word.to_lowercase(), tag.to_string());
    }
    Ok(out)
}

fn make_tagdict(corpus: &[TaggedSentence]) -> BTreeMap<String, String> {
    const FREQ: usize = 4;
    const PURITY: f64 = 0.97;
    let mut counts: BTreeMap<String, BTreeMap<&str, usize>> = BTreeMap::new();
    for (w, t) in corpus.iter().flatten() {
        *counts
            .entry(w.to_lowercase())
            .or_default()
            .entry(t.as_str())
            .or_insert(0) += 1;
    }
    counts
        .into_iter()
        .filter_map(|(word, tags)| {
            let n: usize = tags.values().sum();
            let (tag, mode) = tags.iter().max_by_key(|(_, c)| **c)?;
            (n >= FREQ && *mode as f64 / n as f64 >= PURITY).then(|| (word, tag.to_string()))
        })
        .collect()
}

fn normalize(word: &str) -> String {
    let first = word.chars().next();
    if word.contains('-') && first != Some('-') {
        "!HYPHEN".to_string()
    } else if word.len() == 4 && word.chars().all(|c| c.is_ascii_digit()) {
        "!YEAR".to_string()
    } else if first.is_some_and(|c| c.is_ascii_digit()) {
        "!DIGITS".to_string()
    } else {
        word.to_lowercase()
    }
}

fn build_context(words: &[&str]) -> Vec<String> {
    START
        .iter()
        .map(|s| s.to_string())
        .chain(words.iter().map(|w| normalize(w)))
        .chain(END.iter().map(|s| s.to_string()))
        .collect()
}

fn suffix(word: &str, n: usize) -> &str {
    let count = word.chars().count();
    if count <= n {
        word
    } else {
        let skip = word.char_indices().nth(count - n).map_or(0, |(i, _)| i);
        &word[skip..]
    }
}

fn features(
    i: usize,
    word: &str,
    context: &[String],
    prev: &str,
    prev2: &str,
) -> BTreeMap<String, u32> {
    let i = i + START.len();
    let mut feats = BTreeMap::new();
    let mut add = |name: &str, args: &[&str]| {
        let mut key = String::from(name);
        for a in args {
            key.push(' ');
            key.push_str(a);
        }
        *feats.entry(key).or_insert(0) += 1;
    };
    let lower = word.to_lowercase();
    let pref1: String = lower.chars().take(1).collect();
    add("bias", &[]);
    add("i suffix", &[suffix(&lower, 3)]);
    add("i pref1", &[&pref1]);
    add("i-1 tag", &[prev]);
    add("i-2 tag", &[prev2]);
    add("i tag+i-2 tag", &[prev, prev2]);
    add("i word", &[&context[i]]);
    add("i-1 tag+i word", &[prev, &context[i]]);
    add("i-1 word", &[&context[i - 1]]);
    add("i-1 suffix", &[suffix(&context[i - 1], 3)]);
    add("i-2 word", &[&context[i - 2]]);
    add("i+1 word", &[&context[i + 1]]);
    add("i+1 suffix", &[suffix(&context[i + 1], 3)]);
    add("i+2 word", &[&context[i + 2]]);
    feats
}

struct XorShift(u64);

impl XorShift {
    fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = (self.next() % (i as u64 + 1)) as usize;
            items.swap(i, j);
        }
    }
}
