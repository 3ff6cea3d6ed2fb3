//! robots.txt parsing and matching (RFC 9309 subset).
//!
//! Supported: `User-agent` groups (consecutive agent lines share a group,
//! groups for the same agent merge), `Allow`, `Disallow`, `*` wildcards and
//! the `$` end anchor. The longest matching rule wins; on equal length
//! `Allow` wins. Other directives are ignored.

use std::collections::HashMap;

use parking_lot::Mutex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub allow: bool,
    pub pattern: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Group {
    agents: Vec<String>,
    rules: Vec<Rule>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RobotsTxt {
    groups: Vec<Group>,
}

impl RobotsTxt {
    pub fn parse(text: &str) -> Self {
        let mut groups: Vec<Group> = Vec::new();
        let mut current: Option<Group> = None;
        let mut in_agents = false;
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            match key.as_str() {
                "user-agent" => {
                    if !in_agents {
                        if let Some(g) = current.take() {
                            groups.push(g);
                        }
                        current = Some(Group::default());
                    }
                    in_agents = true;
                    if let Some(g) = current.as_mut() {
                        g.agents.push(value.to_ascii_lowercase());
                    }
                }
                "allow" | "disallow" => {
                    in_agents = false;
                    // Rules before any user-agent line belong to no group.
                    if let Some(g) = current.as_mut() {
                        // An empty Disallow allows everything; it adds no rule.
                        if !value.is_empty() {
                            g.rules.push(Rule {
                                allow: key == "allow",
                                pattern: value.to_string(),
                            });
                        }
                    }
                }
                _ => in_agents = false,
            }
        }
        if let Some(g) = current {
            groups.push(g);
        }
        RobotsTxt { groups }
    }

    /// Rules that apply to `user_agent`: every group naming its product
    /// token, or failing that every `*` group.
    pub fn rules_for(&self, user_agent: &str) -> Vec<Rule> {
        let token = user_agent
            .split('/')
            .next()
            .unwrap_or("")
            .trim()
            .to_ascii_lowercase();
        let specific: Vec<&Group> = self
            .groups
            .iter()
            .filter(|g| g.agents.iter().any(|a| a != "*" && *a == token))
            .collect();
        let chosen = if specific.is_empty() {
            self.groups
                .iter()
                .filter(|g| g.agents.iter().any(|a| a == "*"))
                .collect()
        } else {
            specific
        };
        chosen.into_iter().flat_map(|g| g.rules.clone()).collect()
    }

    pub fn is_allowed(&self, user_agent: &str, path: &str) -> bool {
        is_allowed_by(&self.rules_for(user_agent), path)
    }
}

/// Decide `path` (path plus query) against a rule list.
pub fn is_allowed_by(rules: &[Rule], path: &str) -> bool {
    if path == "/robots.txt" {
        return true;
    }
    let mut best: Option<(usize, bool)> = None;
    for r in rules {
        if pattern_matches(&r.pattern, path) {
            let len = r.pattern.len();
            best = match best {
                Some((l, allow)) if l > len || (l == len && allow) => Some((l, allow)),
                _ => Some((len, r.allow)),
            };
        }
    }
    best.is_none_or(|(_, allow)| allow)
}

/// Prefix match with `*` (any run) and trailing `$` (end of path).
pub fn pattern_matches(pattern: &str, path: &str) -> bool {
    let (pat, anchored) = match pattern.strip_suffix('$') {
        Some(p) => (p, true),
        None => (pattern, false),
    };
    let p: Vec<char> = pat.chars().collect();
    let s: Vec<char> = path.chars().collect();
    // reachable[j]: pattern prefix consumed so far can end at path position j.
    let mut reachable = vec![false; s.len() + 1];
    reachable[0] = true;
    for &pc in &p {
        let mut next = vec![false; s.len() + 1];
        if pc == '*' {
            let mut any = false;
            for j in 0..=s.len() {
                any |= reachable[j];
                next[j] = any;
            }
        } else {
            for j in 0..s.len() {
                if reachable[j] && s[j] == pc {
                    next[j + 1] = true;
                }
            }
        }
        reachable = next;
    }
    if anchored {
        reachable[s.len()]
    } else {
        reachable.iter().any(|&r| r)
    }
}

/// Effective policy for a host, derived from the robots.txt fetch outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RobotsPolicy {
    AllowAll,
    DisallowAll,
    Rules(Vec<Rule>),
}

impl RobotsPolicy {
    /// 2xx → parsed rules; 4xx → no restrictions; 5xx or unreachable →
    /// assume complete disallow.
    pub fn from_fetch(status: Option<u16>, body: &[u8], user_agent: &str) -> Self {
        match status {
            Some(s) if (200..300).contains(&s) => {
                let text = String::from_utf8_lossy(body);
                RobotsPolicy::Rules(RobotsTxt::parse(&text).rules_for(user_agent))
            }
            Some(s) if (400..500).contains(&s) => RobotsPolicy::AllowAll,
            _ => RobotsPolicy::DisallowAll,
        }
    }

    pub fn allows(&self, path: &str) -> bool {
        match self {
            RobotsPolicy::AllowAll => true,
            RobotsPolicy::DisallowAll => path == "/robots.txt",
            RobotsPolicy::Rules(rules) => is_allowed_by(rules, path),
        }
    }
}

/// Per-host policies, fetched once per run and shared between companies.
#[derive(Debug, Default)]
pub struct RobotsCache {
    by_host: Mutex<HashMap<String, RobotsPolicy>>,
}

impl RobotsCache {
    pub fn new() -> Self {
        RobotsCache::default()
    }

    pub fn get(&self, host: &str) -> Option<RobotsPolicy> {
        self.by_host.lock().get(host).cloned()
    }

    pub fn insert(&self, host: &str, policy: RobotsPolicy) {
        self.by_host.lock().insert(host.to_string(), policy);
    }
}
