//! Small string helpers shared by the phrase-handling modules.

use alloc::string::String;
use alloc::vec::Vec;

/// Case-folds a phrase for comparison: trims, lowercases and collapses
/// internal whitespace to single spaces.
pub fn fold(phrase: &str) -> String {
    let mut out = String::with_capacity(phrase.len());
    for word in phrase.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Splits a phrase into lowercase word tokens. Letters, digits, `_`, `-` and
/// `'` stay inside a token; everything else separates tokens.
pub fn tokenize(phrase: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in phrase.chars() {
        if ch.is_alphanumeric() || ch == '_' || ch == '-' || ch == '\'' {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Removes a leading markdown fence line, a trailing fence line and any
/// `PREFIX:` label the models like to prepend.
pub fn strip_fences(text: &str) -> String {
    let mut lines: Vec<&str> = text.lines().collect();
    while lines.first().is_some_and(|l| l.trim().is_empty()) {
        lines.remove(0);
    }
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines
        .first()
        .is_some_and(|l| l.trim_start().starts_with("```"))
    {
        lines.remove(0);
    }
    if lines
        .last()
        .is_some_and(|l| l.trim_start().starts_with("```"))
    {
        lines.pop();
    }
    lines.join("\n")
}

/// Strips a list-bullet prefix (`-`, `*`, `•`, `1.`, `2)`) from a line.
pub fn strip_bullet(line: &str) -> &str {
    let t = line.trim_start();
    for prefix in ["- ", "* ", "• ", "+ "] {
        if let Some(rest) = t.strip_prefix(prefix) {
            return rest.trim_start();
        }
    }
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return r.trim_start();
        }
    }
    t
}

/// True when a line starts with something [`strip_bullet`] would remove.
pub fn has_bullet(line: &str) -> bool {
    strip_bullet(line).len() != line.trim_start().len()
}
