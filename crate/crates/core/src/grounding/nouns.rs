//! Head-noun extraction from short object phrases.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{GroundingError, NounList, PosTagger};
use crate::text::tokenize;

/// Words that open a prepositional tail. Everything from the first of these
/// (after a noun has been seen) describes the object rather than naming it.
const TAIL_OPENERS: &[&str] = &[
    "for", "of", "with", "from", "on", "in", "at", "near", "by", "under", "behind", "beside",
    "inside", "into", "onto", "above", "below", "next", "between", "over", "to",
];

const CONJUNCTIONS: &[&str] = &["and", "or", "&"];

fn is_noun(tag: &str) -> bool {
    tag.starts_with("NN")
}

/// Extracts the nouns that name the object in `phrase`.
///
/// The phrase is tagged, its prepositional tail is dropped, the remaining
/// span is split at coordinating conjunctions, and the rightmost noun of
/// each conjunct is kept. The head is the rightmost kept noun. Plural nouns
/// are reduced to their singular form.
pub fn extract_nouns(phrase: &str, tagger: &PosTagger) -> Result<NounList, GroundingError> {
    if phrase.trim().is_empty() {
        return Err(GroundingError::EmptyPhrase);
    }
    let tokens = tokenize(phrase);
    let tags = tagger.tag(&tokens);

    let mut seen_noun = false;
    let mut end = tokens.len();
    for (i, (tok, tag)) in tokens.iter().zip(&tags).enumerate() {
        let opener = tag == "IN" || tag == "TO" || TAIL_OPENERS.contains(&tok.as_str());
        if opener && seen_noun {
            end = i;
            break;
        }
        seen_noun |= is_noun(tag);
    }

    let mut nouns = Vec::new();
    let mut conjunct_head: Option<String> = None;
    for (tok, tag) in tokens[..end].iter().zip(&tags[..end]) {
        if tag == "CC" || CONJUNCTIONS.contains(&tok.as_str()) {
            nouns.extend(conjunct_head.take());
        } else if is_noun(tag) && tok.chars().any(char::is_alphabetic) {
            conjunct_head = Some(if tag == "NNS" || tag == "NNPS" {
                singular(tok)
            } else {
                tok.clone()
            });
        }
    }
    nouns.extend(conjunct_head);
    if nouns.is_empty() {
        return Err(GroundingError::NoNoun(phrase.to_string()));
    }
    Ok(NounList {
        source_phrase: phrase.trim().to_string(),
        nouns,
    })
}

fn singular(word: &str) -> String {
    const IRREGULAR: &[(&str, &str)] = &[
        ("shelves", "shelf"),
        ("knives", "knife"),
        ("leaves", "leaf"),
        ("people", "person"),
        ("children", "child"),
        ("mice", "mouse"),
        ("feet", "foot"),
        ("teeth", "tooth"),
    ];
    if let Some((_, s)) = IRREGULAR.iter().find(|(p, _)| *p == word) {
        return s.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.len() > 1 {
            return alloc::format!("{stem}y");
        }
    }
    for suffix in ["ches", "shes", "sses", "xes", "zes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    match word.strip_suffix('s') {
        Some(stem) if !stem.ends_with('s') && stem.len() > 1 => stem.to_string(),
        _ => word.to_string(),
    }
}
