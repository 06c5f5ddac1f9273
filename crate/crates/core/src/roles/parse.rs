//! Parsers for the three role outputs.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::scene::Triple;
use crate::text::{fold, has_bullet, strip_bullet, strip_fences};

/// A response line that was dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineWarning {
    /// 1-based line number in the (repaired) text.
    pub line: usize,
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TripleParse {
    pub triples: Vec<Triple>,
    pub warnings: Vec<LineWarning>,
    pub repaired: bool,
}

fn parse_lines<'a>(lines: impl Iterator<Item = &'a str>) -> (Vec<Triple>, Vec<LineWarning>) {
    let mut triples = Vec::new();
    let mut warnings = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('|').collect();
        let result = match parts[..] {
            [h, r, t] => Triple::new(h, r, t).map_err(|e| e.to_string()),
            _ => Err(alloc::format!("expected 3 fields, found {}", parts.len())),
        };
        match result {
            Ok(t) => triples.push(t),
            Err(reason) => warnings.push(LineWarning {
                line: i + 1,
                text: line.to_string(),
                reason,
            }),
        }
    }
    (triples, warnings)
}

/// One `head | relation | tail` per line. When the strict reading finds a
/// malformed or bulleted line, or nothing at all, a single repair pass
/// strips markdown fences and bullets and parses again. Lines that still
/// fail become warnings.
pub fn parse_triples(text: &str) -> TripleParse {
    let (triples, warnings) = parse_lines(text.lines());
    let bulleted = text.lines().any(has_bullet);
    if warnings.is_empty() && !triples.is_empty() && !bulleted {
        return TripleParse {
            triples,
            warnings,
            repaired: false,
        };
    }
    let cleaned = strip_fences(text);
    let (triples, warnings) = parse_lines(cleaned.lines().map(strip_bullet));
    TripleParse {
        triples,
        warnings,
        repaired: true,
    }
}

/// Summary text and `phrase -> name` map from a summarizer response.
pub fn parse_gmk(text: &str) -> (String, BTreeMap<String, String>, Vec<LineWarning>) {
    let cleaned = strip_fences(text);
    let mut summary: Vec<&str> = Vec::new();
    let mut names = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut in_names = false;
    for (i, raw) in cleaned.lines().enumerate() {
        let line = strip_bullet(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = strip_label(line, "names") {
            in_names = true;
            if rest.is_empty() {
                continue;
            }
        }
        if !in_names {
            summary.push(strip_label(line, "summary").unwrap_or(line));
            continue;
        }
        let Some((phrase, name)) = line.split_once("->") else {
            warnings.push(LineWarning {
                line: i + 1,
                text: raw.to_string(),
                reason: "expected `phrase -> name`".into(),
            });
            continue;
        };
        let (phrase, name) = (fold(phrase), name.trim().to_lowercase());
        let valid = !phrase.is_empty()
            && !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_alphanumeric() || c == '_' || c == '-');
        if valid {
            names.insert(phrase, name);
        } else {
            warnings.push(LineWarning {
                line: i + 1,
                text: raw.to_string(),
                reason: "invalid instance name".into(),
            });
        }
    }
    (summary.join(" ").trim().to_string(), names, warnings)
}

/// `LABEL: rest` with a case-insensitive label.
fn strip_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let (head, rest) = line.split_once(':')?;
    head.trim().eq_ignore_ascii_case(label).then(|| rest.trim())
}

/// Plan text with fences and a leading `PLAN:` label removed; `None` when
/// nothing is left.
pub fn parse_planner(text: &str) -> Option<String> {
    let cleaned = strip_fences(text);
    let trimmed = cleaned.trim();
    let body = strip_label(trimmed.lines().next().unwrap_or(""), "plan")
        .map(|first| {
            let rest: Vec<&str> = trimmed.lines().skip(1).collect();
            let mut out = String::from(first);
            for l in rest {
                out.push('\n');
                out.push_str(l);
            }
            out
        })
        .unwrap_or_else(|| trimmed.to_string());
    let body = body.trim();
    (!body.is_empty()).then(|| body.to_string())
}
