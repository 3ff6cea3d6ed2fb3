//! Link scoring for the focused crawl.

use serde::{Deserialize, Serialize};
use url::Url;

/// Registrable domain of a host (`www.novagenix.test` → `novagenix.test`).
/// IP literals and single-label hosts are returned unchanged.
pub fn registrable_domain(host: &str) -> String {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    if host.parse::<std::net::IpAddr>().is_ok() || !host.contains('.') {
        return host;
    }
    psl::domain_str(&host).map_or(host.clone(), str::to_string)
}

pub fn same_site(url: &str, seed_domain: &str) -> bool {
    Url::parse(url)
        .ok()
        .and_then(|u| u.host_str().map(registrable_domain))
        .is_some_and(|d| d == seed_domain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkScorer {
    pub keywords: Vec<String>,
    pub path_weight: f64,
    pub anchor_weight: f64,
}

impl Default for LinkScorer {
    fn default() -> Self {
        LinkScorer {
            keywords: [
                "team",
                "management",
                "leadership",
                "about",
                "contact",
                "impressum",
                "people",
                "board",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            path_weight: 0.6,
            anchor_weight: 0.4,
        }
    }
}

fn tokens(s: &str) -> impl Iterator<Item = String> + '_ {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

impl LinkScorer {
    fn has_keyword(&self, text: &str) -> bool {
        tokens(text).any(|t| {
            self.keywords
                .iter()
                .any(|k| t == *k || t.strip_suffix('s') == Some(k.as_str()))
        })
    }

    /// Path keyword hit counts `path_weight`, anchor hit `anchor_weight`,
    /// summed and capped at 1. Off-site links score 0.
    pub fn score(&self, url: &str, anchor: &str, seed_domain: &str) -> f64 {
        if !same_site(url, seed_domain) {
            return 0.0;
        }
        let path = Url::parse(url).map(|u| u.path().to_string()).unwrap_or_default();
        let mut s = 0.0;
        if self.has_keyword(&path) {
            s += self.path_weight;
        }
        if self.has_keyword(anchor) {
            s += self.anchor_weight;
        }
        f64::min(s, 1.0)
    }
}
