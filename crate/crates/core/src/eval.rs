//! Evaluation against the gold files of a fixture world: linking precision
//! and recall, slot-filling micro-F1, and the phase and phone gold tables.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::crawl::{crawl, seed_crawl, RobotsCache};
use crate::extract::gazetteer::Gazetteer;
use crate::extract::link::link_document;
use crate::extract::phase::PhaseTable;
use crate::fixtures::{FixtureFetcher, FixtureWorld};
use crate::harvest::{parse_trial_record, AdapterRegistry};
use crate::kb::KnowledgeBase;
use crate::model::{EntityId, Phase};
use crate::pipeline::{page_assignments, trial_assignments};
use crate::time::{Clock, FixedClock, Timestamp};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot read gold file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Format { path: String, line: usize, reason: String },
}

/// Non-comment, non-empty lines of a TSV file split on tabs, with 1-based
/// line numbers.
fn tsv_rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split('\t').map(str::to_string).collect()))
        .collect())
}

fn format_err(path: &Path, line: usize, reason: impl Into<String>) -> EvalError {
    EvalError::Format {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

fn columns<const N: usize>(path: &Path, line: usize, row: Vec<String>) -> Result<[String; N], EvalError> {
    let got = row.len();
    row.try_into()
        .map_err(|_| format_err(path, line, format!("expected {N} columns, found {got}")))
}

/// Precision, recall and F1 over set-valued predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl Scores {
    pub fn compare<T: Ord>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> Scores {
        let tp = predicted.intersection(gold).count();
        Scores {
            true_positives: tp,
            false_positives: predicted.len() - tp,
            false_negatives: gold.len() - tp,
        }
    }

    /// 1.0 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        let d = self.true_positives + self.false_positives;
        if d == 0 {
            1.0
        } else {
            self.true_positives as f64 / d as f64
        }
    }

    /// 1.0 when the gold set is empty.
    pub fn recall(&self) -> f64 {
        let d = self.true_positives + self.false_negatives;
        if d == 0 {
            1.0
        } else {
            self.true_positives as f64 / d as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkingDoc {
    pub doc_id: String,
    pub text: String,
}

/// `(doc_id, start, end, entity_id)`, offsets in characters.
pub type LinkLabel = (String, usize, usize, String);

pub fn load_linking_docs(path: &Path) -> Result<Vec<LinkingDoc>, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format_err(path, i + 1, e.to_string())))
        .collect()
}

pub fn load_linking_gold(path: &Path) -> Result<BTreeSet<LinkLabel>, EvalError> {
    tsv_rows(path)?
        .into_iter()
        .map(|(line, row)| {
            let [doc, start, end, entity] = columns::<4>(path, line, row)?;
            let num = |s: &str| s.parse::<usize>().map_err(|_| format_err(path, line, format!("bad offset `{s}`")));
            Ok((doc, num(&start)?, num(&end)?, entity))
        })
        .collect()
}

/// Resolved mentions of every document as labels.
pub fn predict_links(docs: &[LinkingDoc], kb: &KnowledgeBase, config: &PipelineConfig) -> BTreeSet<LinkLabel> {
    let gazetteer = Gazetteer::build(kb, config.extract.weights);
    docs.iter()
        .flat_map(|d| {
            link_document(&d.text, &gazetteer, kb, &config.extract.linker)
                .into_iter()
                .filter_map(|m| m.resolved.map(|id| (d.doc_id.clone(), m.span.0, m.span.1, id.to_string())))
        })
        .collect()
}

/// Linking scores on the world's labeled corpus.
pub fn evaluate_linking(world: &FixtureWorld, kb: &KnowledgeBase, config: &PipelineConfig) -> Result<Scores, EvalError> {
    let docs = load_linking_docs(&world.gold_path("linking_docs.jsonl"))?;
    let gold = load_linking_gold(&world.gold_path("linking.tsv"))?;
    Ok(Scores::compare(&predict_links(&docs, kb, config), &gold))
}

/// `(document, subject, role, object)`; trial documents are
/// `trial:<registry id>`, page documents their URL.
pub type SlotLabel = (String, String, String, String);

pub fn load_slot_gold(path: &Path) -> Result<BTreeSet<SlotLabel>, EvalError> {
    tsv_rows(path)?
        .into_iter()
        .map(|(line, row)| {
            let [doc, s, r, o] = columns::<4>(path, line, row)?;
            Ok((doc, s, r, o))
        })
        .collect()
}

/// Slot predictions over every registry record and every page a crawl of
/// each company website reaches.
pub fn predict_slots(world: &Arc<FixtureWorld>, kb: &KnowledgeBase, config: &PipelineConfig) -> BTreeSet<SlotLabel> {
    let mut out = BTreeSet::new();
    let gazetteer = Gazetteer::build(kb, config.extract.weights);
    let clock = FixedClock::new(Timestamp::from_unix(0));
    let registry = AdapterRegistry::bundled();
    let adapter = registry.get("fixture").expect("bundled fixture adapter");
    for raw in world.records() {
        let Ok(record) = parse_trial_record(raw, adapter, PhaseTable::bundled(), "", clock.now()) else {
            continue;
        };
        let doc = format!("trial:{}", record.registry_id);
        for a in trial_assignments(&record, &gazetteer, kb, config) {
            let (s, r, o) = a.triple();
            out.insert((doc.clone(), s, r, o));
        }
    }
    let fetcher = FixtureFetcher::new(world.clone());
    let robots = RobotsCache::new();
    for company in kb.companies() {
        let Ok(frontier) = seed_crawl(company, config.crawl.limits.max_depth) else {
            continue;
        };
        let outcome = crawl(
            &company.id,
            frontier,
            &fetcher,
            &robots,
            &config.crawl.scorer,
            &config.crawl.limits,
            &clock,
        );
        for snap in &outcome.snapshots {
            for a in page_assignments(snap, &company.id, &gazetteer, kb, config) {
                let (s, r, o) = a.triple();
                out.insert((snap.url.clone(), s, r, o));
            }
        }
    }
    out
}

pub fn evaluate_slots(world: &Arc<FixtureWorld>, kb: &KnowledgeBase, config: &PipelineConfig) -> Result<Scores, EvalError> {
    let gold = load_slot_gold(&world.gold_path("slots.tsv"))?;
    Ok(Scores::compare(&predict_slots(world, kb, config), &gold))
}

/// `(raw string, expected phase)` rows.
pub fn load_phase_gold(path: &Path) -> Result<Vec<(String, Phase)>, EvalError> {
    tsv_rows(path)?
        .into_iter()
        .map(|(line, row)| {
            let [raw, code] = columns::<2>(path, line, row)?;
            let phase = Phase::from_code(&code).ok_or_else(|| format_err(path, line, format!("unknown phase `{code}`")))?;
            Ok((raw, phase))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhoneCase {
    pub country: String,
    pub raw: String,
    /// E.164 output, or `None` when the input must be rejected.
    pub expected: Option<String>,
    pub case: String,
}

pub fn load_phone_gold(path: &Path) -> Result<Vec<PhoneCase>, EvalError> {
    tsv_rows(path)?
        .into_iter()
        .map(|(line, row)| {
            let [country, raw, expected, case] = columns::<4>(path, line, row)?;
            Ok(PhoneCase {
                country,
                raw,
                expected: (expected != "INVALID").then_some(expected),
                case,
            })
        })
        .collect()
}

/// Owner of a page URL among KB companies, by website host.
pub fn page_owner(kb: &KnowledgeBase, url: &str) -> Option<EntityId> {
    let host = url::Url::parse(url).ok()?.host_str()?.to_string();
    kb.companies()
        .find(|c| {
            c.website
                .as_deref()
                .and_then(|w| url::Url::parse(w).ok())
                .is_some_and(|w| w.host_str() == Some(host.as_str()))
        })
        .map(|c| c.id.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_by_hand() {
        let p: BTreeSet<u32> = [1, 2, 3, 4].into();
        let g: BTreeSet<u32> = [2, 3, 4, 5, 6].into();
        let s = Scores::compare(&p, &g);
        assert_eq!((s.true_positives, s.false_positives, s.false_negatives), (3, 1, 2));
        assert_eq!(s.precision(), 0.75);
        assert_eq!(s.recall(), 0.6);
        assert!((s.f1() - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-12);
    }

    #[test]
    fn empty_sets_score_one() {
        let s = Scores::compare::<u32>(&BTreeSet::new(), &BTreeSet::new());
        assert_eq!((s.precision(), s.recall()), (1.0, 1.0));
    }

    #[test]
    fn gold_files_load() {
        let world = FixtureWorld::bundled(crate::fixtures::WorldVersion::V1).unwrap();
        assert!(load_phase_gold(&world.gold_path("phase_gold.tsv")).unwrap().len() >= 25);
        let phones = load_phone_gold(&world.gold_path("phone_gold.tsv")).unwrap();
        assert!(phones.iter().any(|c| c.expected.is_none()));
        assert!(load_linking_gold(&world.gold_path("linking.tsv")).unwrap().len() >= 200);
    }
}
