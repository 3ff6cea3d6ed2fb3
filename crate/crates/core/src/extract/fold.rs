//! Case and diacritic folding, and token spans over the folded text.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Lowercase and strip combining marks (`"Zürich"` → `"zurich"`).
pub fn fold(s: &str) -> String {
    s.nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect()
}

/// One alphanumeric run of the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Folded form.
    pub norm: String,
    /// Char offset of the first character in the source text.
    pub start: usize,
    /// Char offset one past the last character.
    pub end: usize,
}

/// Split on every non-alphanumeric character; offsets are in chars.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut idx = 0;
    for c in text.chars() {
        if c.is_alphanumeric() {
            if current.is_empty() {
                start = idx;
            }
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(Token {
                norm: fold(&current),
                start,
                end: idx,
            });
            current.clear();
        }
        idx += 1;
    }
    if !current.is_empty() {
        tokens.push(Token {
            norm: fold(&current),
            start,
            end: idx,
        });
    }
    tokens
}

/// The gazetteer key of a surface form: folded tokens joined by one space.
pub fn surface_key(s: &str) -> String {
    tokenize(s)
        .into_iter()
        .map(|t| t.norm)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Substring by char offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}
