//! Gazetteer-driven entity linking with a document-coherence rerank.
//!
//! Linking replaces recognition: only surfaces present in the gazetteer can
//! become mentions. Ambiguous surfaces are resolved by one coherence round
//! that favours candidates sharing domain tags with the entities already
//! resolved in the same document.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::kb::KnowledgeBase;
use crate::model::{EntityId, EntityKind};

use super::fold::{char_slice, tokenize};
use super::gazetteer::Gazetteer;

/// Comparison slack for score thresholds.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkerConfig {
    pub nil_threshold: f64,
    pub rerank_margin: f64,
    pub coherence_boost: f64,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        LinkerConfig {
            nil_threshold: 0.6,
            rerank_margin: 0.1,
            coherence_boost: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub entity_id: EntityId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedMention {
    pub surface: String,
    /// Char offsets `[start, end)` into the document text.
    pub span: (usize, usize),
    /// Descending by score.
    pub candidates: Vec<Candidate>,
    /// `None` is NIL (or, before reranking, still pending).
    pub resolved: Option<EntityId>,
    pub confidence: f64,
}

impl LinkedMention {
    pub fn is_ambiguous(&self) -> bool {
        self.resolved.is_none() && self.candidates.len() > 1
    }
}

struct Match {
    start_tok: usize,
    len: usize,
    candidates: Vec<Candidate>,
}

/// Longest-match scan over folded tokens.
///
/// All gazetteer hits are collected, then accepted longest-first (earliest
/// start on ties) while they do not overlap an accepted hit.
pub fn link_mentions(text: &str, gazetteer: &Gazetteer, config: &LinkerConfig) -> Vec<LinkedMention> {
    let tokens = tokenize(text);
    let max_len = gazetteer.max_tokens().max(1);
    let mut matches = Vec::new();
    for i in 0..tokens.len() {
        let mut key = String::new();
        for len in 1..=max_len.min(tokens.len() - i) {
            if len > 1 {
                key.push(' ');
            }
            key.push_str(&tokens[i + len - 1].norm);
            let entries = gazetteer.lookup(&key);
            if entries.is_empty() {
                continue;
            }
            let (start, end) = (tokens[i].start, tokens[i + len - 1].end);
            let original = char_slice(text, start, end);
            let candidates: Vec<Candidate> = entries
                .iter()
                .filter(|e| e.exact.as_ref().is_none_or(|x| *x == original))
                .map(|e| Candidate {
                    entity_id: e.entity_id.clone(),
                    score: e.weight,
                })
                .collect();
            if !candidates.is_empty() {
                matches.push(Match {
                    start_tok: i,
                    len,
                    candidates,
                });
            }
        }
    }
    matches.sort_by(|a, b| b.len.cmp(&a.len).then(a.start_tok.cmp(&b.start_tok)));
    let mut taken = vec![false; tokens.len()];
    let mut accepted = Vec::new();
    for m in matches {
        let range = m.start_tok..m.start_tok + m.len;
        if range.clone().any(|t| taken[t]) {
            continue;
        }
        range.for_each(|t| taken[t] = true);
        accepted.push(m);
    }
    accepted.sort_by_key(|m| m.start_tok);
    accepted
        .into_iter()
        .map(|m| {
            let start = tokens[m.start_tok].start;
            let end = tokens[m.start_tok + m.len - 1].end;
            let (resolved, confidence) = match m.candidates.as_slice() {
                [only] if only.score + EPS >= config.nil_threshold => {
                    (Some(only.entity_id.clone()), only.score)
                }
                _ => (None, 0.0),
            };
            LinkedMention {
                surface: char_slice(text, start, end),
                span: (start, end),
                candidates: m.candidates,
                resolved,
                confidence,
            }
        })
        .collect()
}

fn tags_of(kb: &KnowledgeBase, id: &EntityId) -> BTreeSet<String> {
    match id.kind() {
        Some(EntityKind::Company) => kb
            .company(id)
            .map(|c| c.domain_tags.clone())
            .unwrap_or_default(),
        _ => BTreeSet::new(),
    }
}

/// Jaccard overlap; zero when both sets are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// One propagation round over the unresolved mentions of a document.
///
/// Each candidate score is multiplied by `1 + boost * J`, with `J` the
/// Jaccard overlap between the candidate's domain tags and the union of
/// tags of the document's resolved entities. A mention resolves when its
/// top score reaches the NIL threshold and beats the runner-up by the
/// margin; otherwise it is NIL. Reported scores are capped at 1.0; the
/// resolution decision uses the uncapped values.
pub fn coherence_rerank(
    mentions: Vec<LinkedMention>,
    kb: &KnowledgeBase,
    config: &LinkerConfig,
) -> Vec<LinkedMention> {
    let context: BTreeSet<String> = mentions
        .iter()
        .filter_map(|m| m.resolved.as_ref())
        .flat_map(|id| tags_of(kb, id))
        .collect();
    mentions
        .into_iter()
        .map(|mut m| {
            if m.resolved.is_some() {
                return m;
            }
            let mut boosted: Vec<(EntityId, f64)> = m
                .candidates
                .iter()
                .map(|c| {
                    let j = jaccard(&tags_of(kb, &c.entity_id), &context);
                    (c.entity_id.clone(), c.score * (1.0 + config.coherence_boost * j))
                })
                .collect();
            boosted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let top = boosted.first().map_or(0.0, |b| b.1);
            let runner_up = boosted.get(1).map_or(f64::NEG_INFINITY, |b| b.1);
            if top + EPS >= config.nil_threshold && top - runner_up + EPS >= config.rerank_margin {
                m.resolved = Some(boosted[0].0.clone());
                m.confidence = top.min(1.0);
            } else {
                m.resolved = None;
                m.confidence = 0.0;
            }
            m.candidates = boosted
                .into_iter()
                .map(|(entity_id, score)| Candidate {
                    entity_id,
                    score: score.min(1.0),
                })
                .collect();
            m
        })
        .collect()
}

/// Link then rerank.
pub fn link_document(
    text: &str,
    gazetteer: &Gazetteer,
    kb: &KnowledgeBase,
    config: &LinkerConfig,
) -> Vec<LinkedMention> {
    coherence_rerank(link_mentions(text, gazetteer, config), kb, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::gazetteer::VariantWeights;
    use crate::model::{CompanyEntity, Entity};
    use crate::time::Timestamp;

    fn company(name: &str, alias: Option<&str>, tags: &[&str]) -> CompanyEntity {
        let mut c = CompanyEntity::new(name, "CH");
        if let Some(a) = alias {
            c.aliases.insert(a.into());
        }
        c.domain_tags = tags.iter().map(|s| s.to_string()).collect();
        c
    }

    fn fixture() -> (KnowledgeBase, Gazetteer) {
        let mut kb = KnowledgeBase::new();
        for c in [
            company("Novagenix AG", None, &["biotech"]),
            company("Apex Biosciences AG", Some("Apex"), &["biotech"]),
            company("Apex Freight GmbH", Some("Apex"), &["logistics"]),
        ] {
            kb.upsert(Entity::Company(c), "t", Timestamp::from_unix(0)).unwrap();
        }
        let g = Gazetteer::build(&kb, VariantWeights::default());
        (kb, g)
    }

    #[test]
    fn exact_canonical_match() {
        let (_, g) = fixture();
        let text = "The study is sponsored by Novagenix AG in Basel.";
        let ms = link_mentions(text, &g, &LinkerConfig::default());
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].surface, "Novagenix AG");
        assert_eq!(ms[0].span, (26, 38));
        assert_eq!(ms[0].resolved.as_ref().unwrap().as_str(), "co-00001");
        assert_eq!(ms[0].confidence, 1.0);
    }

    #[test]
    fn generated_variant_scores_lower() {
        let (_, g) = fixture();
        let ms = link_mentions("Work at Novagenix, the CEO said", &g, &LinkerConfig::default());
        assert_eq!(ms[0].surface, "Novagenix");
        assert_eq!(ms[0].candidates[0].score, 0.7);
        assert!(ms[0].resolved.is_some());
    }

    #[test]
    fn ambiguous_surface_stays_pending() {
        let (_, g) = fixture();
        let ms = link_mentions("Apex reported growth.", &g, &LinkerConfig::default());
        assert_eq!(ms.len(), 1);
        assert!(ms[0].is_ambiguous());
        assert_eq!(ms[0].candidates.len(), 2);
    }

    #[test]
    fn rerank_uses_document_context() {
        let (kb, g) = fixture();
        let cfg = LinkerConfig::default();
        let ms = link_document("Novagenix AG and Apex reported results.", &g, &kb, &cfg);
        let apex = &ms[1];
        assert_eq!(apex.resolved.as_ref().unwrap().as_str(), "co-00002");
        // 0.9 * 1.5 = 1.35, capped for reporting.
        assert_eq!(apex.candidates[0].score, 1.0);
        assert!((apex.candidates[1].score - 0.9).abs() < 1e-12);
    }

    #[test]
    fn no_context_means_nil() {
        let (kb, g) = fixture();
        let ms = link_document("Apex reported growth.", &g, &kb, &LinkerConfig::default());
        assert!(ms[0].resolved.is_none());
        assert_eq!(ms[0].candidates[0].score, 0.9);
    }

    #[test]
    fn identical_tags_tie_goes_nil() {
        let mut kb = KnowledgeBase::new();
        for c in [
            company("Novagenix AG", None, &["biotech"]),
            company("Apex Biosciences AG", Some("Apex"), &["biotech"]),
            company("Apex Therapeutics AG", Some("Apex"), &["biotech"]),
        ] {
            kb.upsert(Entity::Company(c), "t", Timestamp::from_unix(0)).unwrap();
        }
        let g = Gazetteer::build(&kb, VariantWeights::default());
        let ms = link_document("Novagenix AG and Apex.", &g, &kb, &LinkerConfig::default());
        assert!(ms[1].resolved.is_none());
    }

    #[test]
    fn longest_match_wins_over_nested() {
        let mut kb = KnowledgeBase::new();
        for c in [
            company("Swiss Biotech Partners GmbH", None, &[]),
            company("Swiss Biotech AG", None, &[]),
        ] {
            kb.upsert(Entity::Company(c), "t", Timestamp::from_unix(0)).unwrap();
        }
        let g = Gazetteer::build(&kb, VariantWeights::default());
        let ms = link_mentions("Swiss Biotech Partners GmbH signed", &g, &LinkerConfig::default());
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].surface, "Swiss Biotech Partners GmbH");
    }

    #[test]
    fn initialism_is_case_sensitive() {
        let mut kb = KnowledgeBase::new();
        kb.upsert(
            Entity::Company(company("Swiss Biotech Partners GmbH", None, &[])),
            "t",
            Timestamp::from_unix(0),
        )
        .unwrap();
        let g = Gazetteer::build(&kb, VariantWeights::default());
        let cfg = LinkerConfig::default();
        assert_eq!(link_mentions("SBP announced", &g, &cfg).len(), 1);
        assert!(link_mentions("sbp announced", &g, &cfg).is_empty());
    }
}
