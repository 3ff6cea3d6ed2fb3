//! Name-variant generation for gazetteer surface forms.

use std::collections::BTreeSet;

use super::fold::fold;

/// Legal-form suffixes removed from company names.
pub const LEGAL_SUFFIXES: &[&str] = &[
    "AG", "GmbH", "Inc", "Inc.", "Ltd", "Ltd.", "SA", "NV", "PLC", "Corp", "Corp.", "LLC", "Co.",
    "S.p.A.",
];

/// Words that do not contribute a letter to an initialism.
const INITIALISM_STOPWORDS: &[&str] = &["&", "and", "of", "the", "for", "de", "du", "der", "und", "für"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NameKind {
    Company,
    Person,
}

/// A generated surface form and whether it is an initialism.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Variant {
    pub text: String,
    pub initialism: bool,
}

fn is_suffix(token: &str) -> bool {
    let t = token.trim_end_matches(',');
    LEGAL_SUFFIXES.iter().any(|s| s.eq_ignore_ascii_case(t))
}

/// Remove trailing legal-form tokens (`"Acme Holding Co. Ltd"` → `"Acme Holding"`).
///
/// At least one token is always kept; a trailing comma left behind is dropped.
pub fn strip_legal_suffix(name: &str) -> String {
    let mut tokens: Vec<&str> = name.split_whitespace().collect();
    while tokens.len() > 1 && is_suffix(tokens[tokens.len() - 1]) {
        tokens.pop();
    }
    let joined = tokens.join(" ");
    joined.trim_end_matches(',').trim().to_string()
}

fn initialism(name: &str) -> Option<String> {
    let letters: String = name
        .split_whitespace()
        .filter(|t| !INITIALISM_STOPWORDS.contains(&t.to_lowercase().as_str()))
        .filter_map(|t| t.chars().find(|c| c.is_alphabetic()))
        .flat_map(char::to_uppercase)
        .collect();
    (letters.chars().count() >= 2).then_some(letters)
}

/// All variants with their initialism flag.
pub fn name_variants(name: &str, kind: NameKind) -> BTreeSet<Variant> {
    let name = name.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut out = BTreeSet::new();
    if name.is_empty() {
        return out;
    }
    let mut push = |text: String, initialism: bool| {
        if initialism || text.chars().count() >= 3 {
            out.insert(Variant { text, initialism });
        }
    };
    push(name.clone(), false);
    push(fold(&name), false);
    match kind {
        NameKind::Company => {
            let stripped = strip_legal_suffix(&name);
            if stripped != name {
                push(stripped.clone(), false);
            }
            if stripped.split_whitespace().count() >= 2 {
                if let Some(i) = initialism(&stripped) {
                    push(i, true);
                }
            }
        }
        NameKind::Person => {
            let tokens: Vec<&str> = name.split_whitespace().collect();
            if tokens.len() >= 2 {
                let family = tokens[tokens.len() - 1];
                let given = tokens[..tokens.len() - 1].join(" ");
                push(format!("{family}, {given}"), false);
            }
        }
    }
    out
}

/// Surface variants of a name: the original, its folded form, and the
/// kind-specific rewrites.
pub fn generate_name_variants(name: &str, kind: NameKind) -> BTreeSet<String> {
    name_variants(name, kind).into_iter().map(|v| v.text).collect()
}
