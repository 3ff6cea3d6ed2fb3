//! Property checks shared by the proptest suite and the acceptance run.
//!
//! Each `check_*` function runs one property under a [`TestRunner`] with
//! the requested number of cases and reports the first failure.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};
use serde_json::json;

use trialkb::extract::slots::{Evidence, Role, SlotAssignment, SlotValue};
use trialkb::fusion::{
    apply_change, fuse_trial, propose_changes, ChangeEvent, Decision, EventEvidence, EventLog, EventStatus,
    FusionOutcome, MergePolicy, ProposalContext,
};
use trialkb::model::{
    ClinicalTrialRecord, CompanyEntity, Entity, EntityId, PersonEntity, PersonnelLink, Phase, Provenance,
    TrialStatus,
};
use trialkb::service::list_changes;
use trialkb::{KnowledgeBase, Timestamp};

pub const STATUSES: [TrialStatus; 6] = [
    TrialStatus::Recruiting,
    TrialStatus::Active,
    TrialStatus::Completed,
    TrialStatus::Terminated,
    TrialStatus::Withdrawn,
    TrialStatus::Unknown,
];

pub fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| match e {
        TestError::Fail(reason, value) => format!("{reason} for {value:?}"),
        TestError::Abort(reason) => format!("aborted: {reason}"),
    })
}

/// KB with companies `co-00001..=co-0000n`, each with a CEO `pe-0000k`.
pub fn base_kb(companies: usize) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new();
    let t = Timestamp::from_unix(0);
    for i in 0..companies {
        let mut c = CompanyEntity::new(format!("Company{i} AG"), "CH");
        c.phones = vec![format!("+4161555{i:04}")];
        let cid = kb.upsert(Entity::Company(c), "seed", t).unwrap();
        let pid = kb
            .upsert(
                Entity::Person(PersonEntity {
                    id: EntityId::default(),
                    full_name: format!("Ceo Person{i}"),
                    affiliations: vec![],
                }),
                "seed",
                t,
            )
            .unwrap();
        let mut c = kb.company(&cid).unwrap().clone();
        c.personnel.push(PersonnelLink {
            person_id: pid,
            role: "CEO".into(),
        });
        kb.upsert(Entity::Company(c), "seed", t).unwrap();
    }
    kb
}

pub fn trial_strategy(ids: u32, companies: usize) -> impl Strategy<Value = ClinicalTrialRecord> {
    (
        0..ids,
        0..Phase::ALL.len(),
        0..STATUSES.len(),
        proptest::option::of(0u32..400),
        proptest::collection::vec(0..companies, 0..3),
        "[a-z]{0,6}",
    )
        .prop_map(|(id, phase, status, day, links, title)| ClinicalTrialRecord {
            id: EntityId::default(),
            registry_id: format!("NCT{id:08}"),
            source: "fixture".into(),
            title: (!title.is_empty()).then_some(title),
            phase: Phase::ALL[phase],
            status: STATUSES[status],
            sponsors: vec![],
            sponsor_links: {
                let mut l: Vec<EntityId> = links.into_iter().map(|i| EntityId::new(format!("co-{:05}", i + 1))).collect();
                l.dedup();
                l
            },
            conditions: vec![],
            interventions: vec![],
            last_update: day.map(|d| NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(d.into())),
            provenance: Provenance {
                source_url: "http://registry.fixture.test/study/x".into(),
                fetched_at: Timestamp::from_unix(0),
                extractor: "test".into(),
            },
        })
}

/// Re-fusing a batch already fused changes nothing.
pub fn check_idempotence(cases: u32) -> Result<(), String> {
    run(cases, proptest::collection::vec(trial_strategy(8, 3), 1..20), |batch| {
        let mut kb = base_kb(3);
        for r in &batch {
            fuse_trial(r, &mut kb, "t", Timestamp::from_unix(1));
        }
        let trials: Vec<ClinicalTrialRecord> = kb.trials().cloned().collect();
        for r in &batch {
            let outcome = fuse_trial(r, &mut kb, "t", Timestamp::from_unix(2));
            prop_assert!(
                matches!(outcome, FusionOutcome::Unchanged { .. }),
                "second pass gave {outcome:?}"
            );
        }
        prop_assert_eq!(kb.trials().cloned().collect::<Vec<_>>(), trials);
        Ok(())
    })
}

/// The stored `last_update` of a trial never decreases, and the stored
/// record is the first one seen with the newest date.
pub fn check_monotone_last_update(cases: u32) -> Result<(), String> {
    run(cases, proptest::collection::vec(trial_strategy(1, 3), 1..15), |seq| {
        let mut kb = base_kb(3);
        let mut best: Option<&ClinicalTrialRecord> = None;
        let mut previous = None;
        for r in &seq {
            fuse_trial(r, &mut kb, "t", Timestamp::from_unix(1));
            if best.is_none_or(|b| r.last_update > b.last_update) {
                best = Some(r);
            }
            let stored = kb.trial(&r.identity()).unwrap();
            prop_assert!(stored.last_update >= previous, "last_update went backwards");
            previous = stored.last_update;
            let b = best.unwrap();
            prop_assert_eq!(stored.last_update, b.last_update);
            prop_assert_eq!(stored.status, b.status);
            prop_assert_eq!(stored.phase, b.phase);
            prop_assert_eq!(&stored.title, &b.title);
        }
        Ok(())
    })
}

fn evidence(url: &str) -> Evidence {
    Evidence {
        url: url.into(),
        span: (0, 5),
        excerpt: "excerpt".into(),
    }
}

/// Curated-role assignments over companies `co-00001..=co-00003`.
pub fn curated_assignment() -> impl Strategy<Value = SlotAssignment> {
    let company = (0usize..3).prop_map(|i| EntityId::new(format!("co-{:05}", i + 1)));
    prop_oneof![
        (company.clone(), 0u32..4).prop_map(|(c, n)| SlotAssignment {
            subject: SlotValue::Entity(c.clone()),
            role: Role::IsPhoneNumberOf,
            object: SlotValue::Phone(format!("+4144000{n:04}")),
            confidence: 0.9,
            evidence: evidence(&format!("http://{c}.test/contact")),
            title: None,
        }),
        (company.clone(), 0u32..4).prop_map(|(c, n)| SlotAssignment {
            subject: SlotValue::Provisional(format!("New Person{n}")),
            role: Role::ChiefExecutiveOfficerOf,
            object: SlotValue::Entity(c.clone()),
            confidence: 0.8,
            evidence: evidence(&format!("http://{c}.test/team")),
            title: Some("CEO".into()),
        }),
        (company, 0u32..4).prop_map(|(c, n)| SlotAssignment {
            subject: SlotValue::Entity(c.clone()),
            role: Role::HasKeyPerson,
            object: SlotValue::Provisional(format!("Key Person{n}")),
            confidence: 0.8,
            evidence: evidence(&format!("http://{c}.test/team")),
            title: Some("CFO".into()),
        }),
    ]
}

fn ctx() -> ProposalContext<'static> {
    ProposalContext {
        fetched_at: Timestamp::from_unix(5),
        extractor: "test",
        changes: &[],
        actor: "pipeline",
        at: Timestamp::from_unix(5),
    }
}

fn pending_keys(log: &EventLog) -> Vec<(EntityId, String, String)> {
    log.events()
        .iter()
        .filter(|e| e.status == EventStatus::Pending)
        .map(|e| (e.entity_id.clone(), e.field.clone(), e.new_value.to_string()))
        .collect()
}

/// Proposing the same facts again raises nothing new, and no two pending
/// events share `(entity, field, new_value)`.
pub fn check_event_dedup(cases: u32) -> Result<(), String> {
    run(cases, proptest::collection::vec(curated_assignment(), 1..12), |batch| {
        let mut kb = base_kb(3);
        let mut log = EventLog::new();
        let policy = MergePolicy::default();
        propose_changes(&batch, &mut kb, &mut log, &policy, &ctx());
        let again = propose_changes(&batch, &mut kb, &mut log, &policy, &ctx());
        prop_assert!(again.is_empty(), "second proposal raised {} events", again.len());
        let mut reversed = batch.clone();
        reversed.reverse();
        propose_changes(&reversed, &mut kb, &mut log, &policy, &ctx());
        let keys = pending_keys(&log);
        let unique: BTreeSet<_> = keys.iter().cloned().collect();
        prop_assert_eq!(keys.len(), unique.len(), "duplicate pending events");
        Ok(())
    })
}

fn curated_view(kb: &KnowledgeBase) -> Vec<(Vec<String>, Vec<PersonnelLink>)> {
    kb.companies().map(|c| (c.phones.clone(), c.personnel.clone())).collect()
}

/// Curated fields change only through accepted events: proposing and
/// rejecting leave them untouched, and the person table only grows on
/// accept.
pub fn check_curated_safety(cases: u32) -> Result<(), String> {
    let strategy = (
        proptest::collection::vec(curated_assignment(), 1..12),
        proptest::collection::vec(any::<bool>(), 12),
    );
    run(cases, strategy, |(batch, accept)| {
        let mut kb = base_kb(3);
        let before = curated_view(&kb);
        let persons_before = kb.persons().count();
        let mut log = EventLog::new();
        let raised = propose_changes(&batch, &mut kb, &mut log, &MergePolicy::default(), &ctx());
        prop_assert_eq!(&curated_view(&kb), &before, "proposal changed a curated field");
        prop_assert_eq!(kb.persons().count(), persons_before);
        let mut any_accept = false;
        for (e, &yes) in raised.iter().zip(&accept) {
            let decision = if yes { Decision::Accept } else { Decision::Reject };
            any_accept |= yes;
            apply_change(&e.event_id, decision, "r", &mut kb, &mut log, Timestamp::from_unix(9)).unwrap();
        }
        if !any_accept {
            prop_assert_eq!(&curated_view(&kb), &before, "rejection changed a curated field");
            prop_assert_eq!(kb.persons().count(), persons_before);
        }
        for e in log.events() {
            prop_assert!(e.status != EventStatus::Pending || !raised.iter().any(|r| r.event_id == e.event_id));
        }
        Ok(())
    })
}

/// All four fusion properties with `cases` iterations each.
pub fn check_fusion_properties(cases: u32) -> Result<(), String> {
    check_idempotence(cases).map_err(|e| format!("idempotence: {e}"))?;
    check_event_dedup(cases).map_err(|e| format!("dedup: {e}"))?;
    check_curated_safety(cases).map_err(|e| format!("curated safety: {e}"))?;
    check_monotone_last_update(cases).map_err(|e| format!("monotone last_update: {e}"))
}

pub fn event_log_strategy(n: usize) -> impl Strategy<Value = Vec<ChangeEvent>> {
    proptest::collection::vec(0usize..3, n).prop_map(|statuses| {
        let mut log = EventLog::new();
        for (i, _) in statuses.iter().enumerate() {
            log.push(
                EntityId::new(format!("co-{:05}", i % 7 + 1)),
                "phones",
                json!([]),
                json!([format!("+41615{i:06}")]),
                EventEvidence {
                    provenance: Provenance {
                        source_url: "http://x.test/".into(),
                        fetched_at: Timestamp::from_unix(0),
                        extractor: "t".into(),
                    },
                    excerpt: String::new(),
                    old_excerpt: None,
                },
                Timestamp::from_unix(i as i64),
            );
        }
        let mut events = log.events().to_vec();
        for (e, s) in events.iter_mut().zip(statuses) {
            e.status = [EventStatus::Pending, EventStatus::Accepted, EventStatus::Rejected][s];
        }
        events
    })
}

/// Walking every page of a filtered listing yields exactly a linear scan.
pub fn check_listing_matches_scan(cases: u32) -> Result<(), String> {
    let status = proptest::option::of(prop_oneof![
        Just(EventStatus::Pending),
        Just(EventStatus::Accepted),
        Just(EventStatus::Rejected)
    ]);
    run(cases, (event_log_strategy(100), status, 1usize..40), |(events, status, limit)| {
        let expected: Vec<String> = events
            .iter()
            .filter(|e| status.is_none_or(|s| e.status == s))
            .map(|e| e.event_id.clone())
            .collect();
        let mut got = Vec::new();
        let mut cursor = 0;
        loop {
            let view = list_changes(&events, status, cursor, limit);
            prop_assert!(view.events.len() <= limit);
            prop_assert_eq!(view.total, expected.len());
            got.extend(view.events.iter().map(|e| e.event_id.clone()));
            match view.next_cursor {
                Some(c) => cursor = c.parse().unwrap(),
                None => break,
            }
        }
        prop_assert_eq!(got, expected);
        Ok(())
    })
}

/// Counts recomputed from the trial list by hand.
pub fn recount(kb: &KnowledgeBase) -> BTreeMap<&'static str, u64> {
    let mut m = BTreeMap::new();
    m.insert("total", kb.trials().count() as u64);
    m.insert("linked", kb.trials().filter(|t| !t.sponsor_links.is_empty()).count() as u64);
    m.insert(
        "completed",
        kb.trials().filter(|t| t.status == TrialStatus::Completed).count() as u64,
    );
    m
}

/// Independent restatement of the link score: a keyword token (or its
/// plural) in the path earns `path_weight`, in the anchor `anchor_weight`.
pub fn oracle_score(path: &str, anchor: &str, keywords: &[String], path_weight: f64, anchor_weight: f64) -> f64 {
    let hit = |text: &str| {
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .any(|t| keywords.iter().any(|k| t == k || t == format!("{k}s")))
    };
    let mut s = 0.0;
    if hit(path) {
        s += path_weight;
    }
    if hit(anchor) {
        s += anchor_weight;
    }
    f64::min(s, 1.0)
}

pub const ORBIS: &str = "www.orbis-clinical.test";

#[derive(Debug)]
pub struct CrawlCheck {
    pub fetched: BTreeSet<String>,
    pub oracle: BTreeSet<String>,
    pub disallowed_fetches: Vec<String>,
    pub min_gap: Option<std::time::Duration>,
    pub site_pages: usize,
}

/// Crawl the 30-page compliance site with page budget `budget` and
/// per-host delay `delay`, and compute the top-B oracle from the site
/// files directly.
pub fn crawl_compliance(budget: usize, delay: std::time::Duration) -> CrawlCheck {
    use std::sync::Arc;
    use trialkb::crawl::{crawl, seed_crawl, CrawlLimits, LinkScorer, RobotsCache};
    use trialkb::fetch::{PoliteFetcher, RecordingFetcher};
    use trialkb::fixtures::{FixtureFetcher, FixtureWorld, WorldVersion};
    use trialkb::FixedClock;

    let world = Arc::new(FixtureWorld::bundled(WorldVersion::V1).unwrap());
    let site = world.root().join("sites").join(ORBIS);
    let robots = std::fs::read_to_string(site.join("robots.txt")).unwrap();
    let disallow: Vec<String> = robots
        .lines()
        .filter_map(|l| l.strip_prefix("Disallow:"))
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect();
    let index = std::fs::read_to_string(site.join("index.html")).unwrap();
    let link_re = regex::Regex::new(r#"<a href="([^"]+)">([^<]*)</a>"#).unwrap();
    let scorer = LinkScorer::default();
    let home = format!("http://{ORBIS}/");
    // Stable sort keeps document order among equal scores.
    let mut candidates: Vec<(f64, String)> = link_re
        .captures_iter(&index)
        .map(|c| (c[1].to_string(), c[2].to_string()))
        .filter(|(path, _)| !disallow.iter().any(|d| path.starts_with(d.as_str())))
        .map(|(path, anchor)| {
            let s = oracle_score(&path, &anchor, &scorer.keywords, scorer.path_weight, scorer.anchor_weight);
            (s, format!("http://{ORBIS}{path}"))
        })
        .collect();
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut oracle: BTreeSet<String> = candidates.into_iter().take(budget - 1).map(|(_, u)| u).collect();
    oracle.insert(home);
    let site_pages = walk_html(&site);

    let fetcher = PoliteFetcher::new(RecordingFetcher::new(FixtureFetcher::new(world.clone())), delay);
    let mut company = CompanyEntity::new("Orbis Clinical Services AG", "CH");
    company.id = EntityId::from("co-00099");
    company.website = Some(format!("http://{ORBIS}/"));
    let limits = CrawlLimits { max_pages: budget, max_depth: 3 };
    let outcome = crawl(
        &company.id,
        seed_crawl(&company, limits.max_depth).unwrap(),
        &fetcher,
        &RobotsCache::new(),
        &scorer,
        &limits,
        &FixedClock::new(Timestamp::from_unix(0)),
    );
    let requested = fetcher.inner().urls();
    let disallowed_fetches = requested
        .iter()
        .filter(|u| {
            let path = u.trim_start_matches(&format!("http://{ORBIS}"));
            disallow.iter().any(|d| path.starts_with(d.as_str()))
        })
        .cloned()
        .collect();
    CrawlCheck {
        fetched: outcome.snapshots.iter().map(|s| s.url.clone()).collect(),
        oracle,
        disallowed_fetches,
        min_gap: fetcher.inner().min_gap_per_host(),
        site_pages,
    }
}

fn walk_html(dir: &std::path::Path) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            if p.is_dir() {
                walk_html(&p)
            } else {
                usize::from(p.extension().is_some_and(|e| e == "html"))
            }
        })
        .sum()
}

#[derive(Debug, Default)]
pub struct HarvestCheck {
    pub records_in_registry: usize,
    pub expected_ids: BTreeSet<String>,
    pub harvested_ids: BTreeSet<String>,
    pub terms: usize,
    pub empty_terms: usize,
    pub boundary_terms: usize,
    pub fetches: usize,
    pub duplicate_fetches: usize,
    /// Fetches of a page after a page of the same term that had no records.
    pub fetches_past_empty: usize,
    /// Expected fetches when the adapter trusts the declared count.
    pub minimal_fetches: usize,
}

/// Full harvest of the seed KB against the fixture registry through
/// `adapter_id`, with every request recorded.
pub fn harvest_completeness(adapter_id: &str) -> HarvestCheck {
    use std::sync::Arc;
    use trialkb::config::PipelineConfig;
    use trialkb::fetch::RecordingFetcher;
    use trialkb::fixtures::{FixtureFetcher, FixtureWorld, WorldVersion};
    use trialkb::{pipeline, FixedClock};

    let world = Arc::new(FixtureWorld::bundled(WorldVersion::V1).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let mut store = world.seed_store(&dir.path().join("kb")).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.harvest.only = vec![adapter_id.to_string()];
    let registry = pipeline::load_adapters(&cfg).unwrap();
    let adapters = pipeline::select_adapters(&registry, &cfg).unwrap();
    let page_size = adapters[0].pagination.page_size as usize;
    let fetcher = RecordingFetcher::new(FixtureFetcher::new(world.clone()));
    let clock = FixedClock::new(Timestamp::from_unix(1_700_000_000));
    let (_, report) = pipeline::harvest(&mut store, &adapters, &fetcher, &clock, &cfg, None).unwrap();

    // Oracle: the registry file itself and a case-insensitive substring
    // search over lead sponsor and title.
    let raw: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(world.root().join("registry/records.json")).unwrap()).unwrap();
    let hits = |term: &str| {
        let t = term.to_lowercase();
        raw.iter()
            .filter(|r| {
                ["lead_sponsor", "brief_title"]
                    .iter()
                    .any(|k| r[*k].as_str().is_some_and(|v| v.to_lowercase().contains(&t)))
            })
            .count()
    };
    let mut check = HarvestCheck {
        records_in_registry: raw.len(),
        expected_ids: raw.iter().map(|r| r["nct_id"].as_str().unwrap().to_string()).collect(),
        harvested_ids: report.records.iter().map(|r| r.registry_id.clone()).collect(),
        ..Default::default()
    };

    let urls = fetcher.urls();
    check.fetches = urls.len();
    check.duplicate_fetches = urls.len() - urls.iter().collect::<BTreeSet<_>>().len();
    let mut pages_by_term: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for u in &urls {
        let parsed = url::Url::parse(u).unwrap();
        let q: BTreeMap<String, String> = parsed.query_pairs().into_owned().collect();
        pages_by_term
            .entry(q["term"].clone())
            .or_default()
            .push(q.get("page").map_or(1, |p| p.parse().unwrap()));
    }
    for (term, pages) in &pages_by_term {
        let n = hits(term);
        check.terms += 1;
        if n == 0 {
            check.empty_terms += 1;
        } else if n % page_size == 0 {
            check.boundary_terms += 1;
        }
        check.minimal_fetches += n.div_ceil(page_size).max(1);
        let mut seen_empty = false;
        for &p in pages {
            if seen_empty {
                check.fetches_past_empty += 1;
            }
            if (p - 1) * page_size >= n {
                seen_empty = true;
            }
        }
    }
    check
}
