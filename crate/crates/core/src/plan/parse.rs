use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Plan, PlanError, PlanStep, Primitive, Vocabulary, DEFAULT_VERB_THRESHOLD};
use crate::grounding::{similarity_words, EmbeddingStore, Normalization};
use crate::text::{fold, strip_bullet};

/// Maps an action word or phrase onto a primitive: exact synonym-table hit
/// first, then the best embedding similarity against the primitive names if
/// it reaches `threshold`.
pub fn normalize_verb(
    verb: &str,
    vocabulary: &Vocabulary,
    store: Option<&EmbeddingStore>,
    threshold: f64,
) -> Option<Primitive> {
    let folded = fold(verb);
    if folded.is_empty() {
        return None;
    }
    if let Some(p) = vocabulary.synonym(&folded) {
        return Some(p);
    }
    let store = store?;
    let words: Vec<&str> = folded.split(' ').collect();
    let mut best: Option<(Primitive, f64)> = None;
    for p in Primitive::ALL {
        let name = p.name().to_lowercase();
        let s = similarity_words(&words, &[name.as_str()], store, Normalization::FirstList);
        if s.oov {
            continue;
        }
        if best.is_none_or(|(_, b)| s.score > b) {
            best = Some((p, s.score));
        }
    }
    best.filter(|(_, s)| *s >= threshold).map(|(p, _)| p)
}

/// Plan parser configuration.
#[derive(Debug, Clone)]
pub struct PlanParser<'a> {
    pub vocabulary: &'a Vocabulary,
    pub store: Option<&'a EmbeddingStore>,
    pub verb_threshold: f64,
    /// Grounded object phrases used to split steps that omit a connective
    /// (`DROP trophy middle shelf` with no known connective).
    pub known_objects: Vec<String>,
}

impl<'a> PlanParser<'a> {
    pub fn new(vocabulary: &'a Vocabulary) -> Self {
        Self {
            vocabulary,
            store: None,
            verb_threshold: DEFAULT_VERB_THRESHOLD,
            known_objects: Vec::new(),
        }
    }

    pub fn with_store(mut self, store: &'a EmbeddingStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn with_known_objects<I, S>(mut self, objects: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.known_objects = objects.into_iter().map(|s| fold(s.as_ref())).collect();
        self
    }

    pub fn parse(&self, text: &str) -> Result<Plan, PlanError> {
        let segments = split_steps(text);
        if segments.is_empty() {
            return Err(PlanError::Empty);
        }
        let steps = segments
            .iter()
            .enumerate()
            .map(|(i, s)| self.parse_step(i, s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Plan {
            steps,
            source: text.to_string(),
        })
    }

    fn parse_step(&self, index: usize, raw: &str) -> Result<PlanStep, PlanError> {
        let words: Vec<&str> = raw.split_whitespace().collect();
        let folded: Vec<String> = words.iter().map(|w| fold(w)).collect();

        let mut verb = None;
        for n in (1..=self.vocabulary.max_synonym_words().min(words.len())).rev() {
            if let Some(p) = self.vocabulary.synonym(&folded[..n].join(" ")) {
                verb = Some((p, n));
                break;
            }
        }
        let (primitive, consumed) = match verb {
            Some(v) => v,
            None => {
                let p = normalize_verb(words[0], self.vocabulary, self.store, self.verb_threshold)
                    .ok_or_else(|| PlanError::Unmappable {
                        step: index,
                        verb: words[0].to_string(),
                    })?;
                (p, 1)
            }
        };
        let rest = &words[consumed..];
        let rest_folded = &folded[consumed..];
        let join = |ws: &[&str]| (!ws.is_empty()).then(|| ws.join(" "));

        let (mut object, mut preposition, mut target) = (None, None, None);
        if primitive == Primitive::Navigate {
            // NAVIGATE takes only a destination; a leading connective is
            // kept as its preposition.
            let mut start = 0;
            if let Some(c) = self.connective_at(rest_folded, 0) {
                if !c.keep {
                    preposition = Some(c.text());
                    start = c.words.len();
                }
            }
            target = join(&rest[start..]);
        } else if let Some((pos, c)) =
            (1..rest.len()).find_map(|i| self.connective_at(rest_folded, i).map(|c| (i, c)))
        {
            object = join(&rest[..pos]);
            if c.keep {
                target = join(&rest[pos..]);
            } else {
                preposition = Some(c.text());
                target = join(&rest[pos + c.words.len()..]);
            }
        } else {
            object = join(rest);
            if primitive == Primitive::Drop {
                if let Some(split) = self.known_suffix(rest_folded) {
                    object = join(&rest[..split]);
                    target = join(&rest[split..]);
                }
            }
        }

        let arity = |missing: &str| PlanError::Arity {
            step: index,
            primitive,
            missing: missing.to_string(),
        };
        if primitive.needs_object() && object.is_none() {
            return Err(arity("object"));
        }
        if primitive.needs_target() && target.is_none() {
            return Err(arity("target"));
        }
        Ok(PlanStep {
            primitive,
            object,
            target,
            preposition,
            raw: raw.to_string(),
        })
    }

    fn connective_at(&self, words: &[String], at: usize) -> Option<&super::Connective> {
        self.vocabulary.connectives().iter().find(|c| {
            words.len() >= at + c.words.len()
                && c.words.iter().zip(&words[at..]).all(|(a, b)| a == b)
        })
    }

    /// Start index of the longest known-object suffix leaving a non-empty
    /// object.
    fn known_suffix(&self, words: &[String]) -> Option<usize> {
        (1..words.len()).find(|&s| self.known_objects.contains(&words[s..].join(" ")))
    }
}

/// Parses plan text with the shipped vocabulary and no embedding fallback.
pub fn parse_plan(text: &str) -> Result<Plan, PlanError> {
    PlanParser::new(&Vocabulary::default()).parse(text)
}

/// Splits plan text at top-level commas, semicolons and line breaks;
/// separators inside brackets or quotes are ignored. List bullets and
/// trailing periods are stripped from each step.
fn split_steps(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut quoted = false;
    let mut current = String::new();
    let mut flush = |current: &mut String| {
        let step = strip_bullet(current.trim())
            .trim()
            .trim_end_matches('.')
            .trim()
            .to_string();
        if !step.is_empty() {
            out.push(step);
        }
        current.clear();
    };
    for ch in text.chars() {
        match ch {
            '"' => quoted = !quoted,
            '(' | '[' | '{' if !quoted => depth += 1,
            ')' | ']' | '}' if !quoted => depth -= 1,
            ',' | ';' | '\n' if depth <= 0 && !quoted => {
                flush(&mut current);
                continue;
            }
            _ => {}
        }
        current.push(ch);
    }
    flush(&mut current);
    out
}
