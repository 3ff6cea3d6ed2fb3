//! Page classification: URL path keywords first, body keyword density second.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::extract::phone::{find_phone_numbers, PhoneRules};

use super::snapshot::PageSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PageClass {
    Team,
    Contact,
    About,
    Other,
}

impl PageClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PageClass::Team => "team",
            PageClass::Contact => "contact",
            PageClass::About => "about",
            PageClass::Other => "other",
        }
    }
}

const TEAM_WORDS: &[&str] = &["team", "management", "leadership", "people", "board", "executives"];
const CONTACT_WORDS: &[&str] = &["contact", "kontakt", "impressum", "imprint"];
const ABOUT_WORDS: &[&str] = &["about", "company", "history"];

fn path_tokens(url: &str) -> Vec<String> {
    let path = Url::parse(url).map(|u| u.path().to_string()).unwrap_or_default();
    path.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn any_word(tokens: &[String], words: &[&str]) -> bool {
    tokens
        .iter()
        .any(|t| words.iter().any(|w| t == w || t.strip_suffix('s') == Some(w)))
}

fn title_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\b(?:CEO|CFO|COO|CTO|CMO|CSO|Chief [A-Z][a-z]+(?: [A-Z][a-z]+)? Officer|Chair(?:man|woman|person)?|Board Member|Managing Director)\b")
            .expect("static regex")
    })
}

/// Team on three or more title mentions; contact on a phone number next to
/// contact vocabulary.
fn classify_text(text: &str) -> PageClass {
    if title_re().find_iter(text).count() >= 3 {
        return PageClass::Team;
    }
    let lower = text.to_lowercase();
    let contact_vocab = ["phone", "tel", "telefon", "contact", "call us"]
        .iter()
        .any(|w| lower.contains(w));
    if contact_vocab && !find_phone_numbers(text, PhoneRules::bundled(), None).is_empty() {
        return PageClass::Contact;
    }
    PageClass::Other
}

pub fn classify_url(url: &str) -> Option<PageClass> {
    let tokens = path_tokens(url);
    if any_word(&tokens, TEAM_WORDS) {
        Some(PageClass::Team)
    } else if any_word(&tokens, CONTACT_WORDS) {
        Some(PageClass::Contact)
    } else if any_word(&tokens, ABOUT_WORDS) {
        Some(PageClass::About)
    } else {
        None
    }
}

pub fn classify_page(snapshot: &PageSnapshot) -> PageClass {
    let Ok(body) = std::str::from_utf8(&snapshot.body) else {
        return PageClass::Other;
    };
    if let Some(c) = classify_url(&snapshot.url) {
        return c;
    }
    classify_text(&super::html::visible_text(body))
}
