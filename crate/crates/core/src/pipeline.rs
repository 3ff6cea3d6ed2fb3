//! End-to-end runs: harvest (plan, fetch, parse, link, fuse) and crawl
//! (seed, crawl, detect changes, extract, propose).
//!
//! Both runs mutate the in-memory [`Store`]; persisting is left to the
//! caller so a dry run can simply skip the checkpoint.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::crawl::{crawl_company, CompanyCrawl, PageSnapshot, RobotsCache, SnapshotError, SnapshotStore};
use crate::extract::gazetteer::Gazetteer;
use crate::extract::link::link_document;
use crate::extract::phase::PhaseTable;
use crate::extract::phone::PhoneRules;
use crate::extract::slots::{fill_slots, Document, DocumentKind, Role, SlotAssignment, SlotContext, SlotValue};
use crate::fetch::{FetchError, Fetcher, HttpConfig, HttpFetcher, PoliteFetcher};
use crate::fixtures::{FixtureError, FixtureFetcher, FixtureWorld};
use crate::fusion::{fuse_trial, propose_changes, ChangeEvent, FusionOutcome, FusionSummary, Policy, ProposalContext};
use crate::harvest::{
    plan_all, run_harvest, AdapterRegistry, HarvestOptions, HarvestReport, PlanOptions, QueryTask, SourceAdapter,
};
use crate::kb::{KbError, KnowledgeBase};
use crate::model::{ClinicalTrialRecord, CompanyEntity, Entity, EntityId};
use crate::store::Store;
use crate::time::Clock;

/// Actor recorded in the audit log for pipeline writes.
pub const PIPELINE_ACTOR: &str = "pipeline";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("adapter configuration: {0}")]
    Adapters(String),
    #[error("adapter `{0}` is not configured")]
    UnknownAdapter(String),
    #[error("company `{0}` is not in the knowledge base")]
    UnknownCompany(String),
    #[error(transparent)]
    Fixtures(#[from] FixtureError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

/// The fetcher the config asks for, wrapped in per-host politeness.
pub fn build_fetcher(config: &PipelineConfig) -> Result<Arc<dyn Fetcher>, PipelineError> {
    let delay = config.http.delay();
    if config.fixtures.enabled {
        let world = match &config.fixtures.root {
            Some(root) => FixtureWorld::load(root, config.fixtures.version)?,
            None => FixtureWorld::bundled(config.fixtures.version)?,
        };
        return Ok(Arc::new(PoliteFetcher::new(FixtureFetcher::new(Arc::new(world)), delay)));
    }
    let http = HttpFetcher::new(&HttpConfig {
        timeout: std::time::Duration::from_millis(config.http.timeout_ms),
        proxy: config.http.proxy.clone(),
    })?;
    Ok(Arc::new(PoliteFetcher::new(http, delay)))
}

/// The configured adapter file, or the bundled registry.
pub fn load_adapters(config: &PipelineConfig) -> Result<AdapterRegistry, PipelineError> {
    match &config.harvest.adapters {
        Some(path) => AdapterRegistry::load(path).map_err(|e| PipelineError::Adapters(e.to_string())),
        None => Ok(AdapterRegistry::bundled()),
    }
}

/// Adapters selected by `harvest.only`, or every enabled one.
pub fn select_adapters<'a>(
    registry: &'a AdapterRegistry,
    config: &PipelineConfig,
) -> Result<Vec<&'a SourceAdapter>, PipelineError> {
    if config.harvest.only.is_empty() {
        return Ok(registry.enabled().collect());
    }
    config
        .harvest
        .only
        .iter()
        .map(|id| registry.get(id).ok_or_else(|| PipelineError::UnknownAdapter(id.clone())))
        .collect()
}

fn check_company(kb: &KnowledgeBase, company: Option<&EntityId>) -> Result<(), PipelineError> {
    match company {
        Some(id) if kb.company(id).is_none() => Err(PipelineError::UnknownCompany(id.to_string())),
        _ => Ok(()),
    }
}

fn harvest_options(config: &PipelineConfig, company: Option<&EntityId>, clock: &dyn Clock) -> HarvestOptions {
    HarvestOptions {
        execute: config.harvest.execute,
        plan: PlanOptions {
            resync: config.harvest.resync_horizon_secs.map(|h| (clock.now(), h)),
        },
        company: company.cloned(),
    }
}

/// The query plan a harvest would execute, without fetching anything.
pub fn plan_harvest(
    kb: &KnowledgeBase,
    adapters: &[&SourceAdapter],
    config: &PipelineConfig,
    company: Option<&EntityId>,
    clock: &dyn Clock,
) -> Result<Vec<QueryTask>, PipelineError> {
    check_company(kb, company)?;
    Ok(plan_all(kb, adapters, &harvest_options(config, company, clock)))
}

/// Sponsor list of a trial as the linker sees it: lead sponsor first, one
/// sponsor per line.
pub fn trial_document_text(record: &ClinicalTrialRecord) -> String {
    record.sponsors.join("\n")
}

/// Slot assignments for one trial record.
pub fn trial_assignments(
    record: &ClinicalTrialRecord,
    gazetteer: &Gazetteer,
    kb: &KnowledgeBase,
    config: &PipelineConfig,
) -> Vec<SlotAssignment> {
    let text = trial_document_text(record);
    let mentions = link_document(&text, gazetteer, kb, &config.extract.linker);
    let subject = record.identity();
    let doc = Document {
        url: &record.provenance.source_url,
        text: &text,
        kind: DocumentKind::TrialRecord { phase: record.phase },
        subject: &subject,
    };
    let ctx = SlotContext {
        kb,
        phone_rules: PhoneRules::bundled(),
        config: &config.extract.slots,
    };
    fill_slots(&doc, &mentions, &ctx)
}

/// Slot assignments for one crawled page of `company`.
pub fn page_assignments(
    snapshot: &PageSnapshot,
    company: &EntityId,
    gazetteer: &Gazetteer,
    kb: &KnowledgeBase,
    config: &PipelineConfig,
) -> Vec<SlotAssignment> {
    if !snapshot.is_success() {
        return Vec::new();
    }
    let text = snapshot.text();
    let mentions = link_document(&text, gazetteer, kb, &config.extract.linker);
    let doc = Document {
        url: &snapshot.url,
        text: &text,
        kind: DocumentKind::Page(snapshot.page_class),
        subject: company,
    };
    let ctx = SlotContext {
        kb,
        phone_rules: PhoneRules::bundled(),
        config: &config.extract.slots,
    };
    fill_slots(&doc, &mentions, &ctx)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct HarvestSummary {
    pub tasks: usize,
    pub failed_tasks: usize,
    pub fetches: usize,
    pub records: usize,
    pub rejected: usize,
    pub linked_records: usize,
    pub fusion: FusionSummary,
}

impl HarvestSummary {
    /// True when some records were quarantined or some task gave up.
    pub fn is_partial_failure(&self) -> bool {
        self.failed_tasks > 0 || self.rejected > 0 || self.fusion.quarantined > 0
    }
}

/// Harvest every planned query, link sponsors and fuse the records.
///
/// Records that fail parsing or validation go to quarantine. Companies
/// whose tasks all succeeded get `last_harvested` stamped.
pub fn harvest(
    store: &mut Store,
    adapters: &[&SourceAdapter],
    fetcher: &dyn Fetcher,
    clock: &dyn Clock,
    config: &PipelineConfig,
    company: Option<&EntityId>,
) -> Result<(HarvestSummary, HarvestReport), PipelineError> {
    check_company(&store.kb, company)?;
    let options = harvest_options(config, company, clock);
    let report = run_harvest(&store.kb, adapters, fetcher, PhaseTable::bundled(), clock, &options);
    let mut summary = HarvestSummary {
        tasks: report.tasks.len(),
        failed_tasks: report.failed_tasks().count(),
        fetches: report.fetches(),
        records: report.records.len(),
        rejected: report.rejected.len(),
        ..Default::default()
    };
    let now = clock.now();
    for r in &report.rejected {
        store.quarantine_record(
            now,
            &r.page_url,
            &r.error.to_string(),
            json!({ "adapter_id": r.adapter_id, "raw": r.raw }),
        );
    }

    let gazetteer = Gazetteer::build(&store.kb, config.extract.weights);
    let link_sponsors = config.fusion.performed_by == Policy::Auto;
    for record in &report.records {
        let mut record = record.clone();
        if link_sponsors {
            record.sponsor_links = trial_assignments(&record, &gazetteer, &store.kb, config)
                .into_iter()
                .filter(|a| a.role == Role::PerformedBy)
                .filter_map(|a| match a.object {
                    SlotValue::Entity(id) => Some(id),
                    _ => None,
                })
                .collect();
        }
        if !record.sponsor_links.is_empty() {
            summary.linked_records += 1;
        }
        let outcome = fuse_trial(&record, &mut store.kb, PIPELINE_ACTOR, now);
        if let FusionOutcome::Quarantined { reason } = &outcome {
            let raw = serde_json::to_value(&record).unwrap_or_default();
            store.quarantine_record(now, &record.provenance.source_url, reason, raw);
        }
        summary.fusion.add(&outcome);
    }

    let mut failed: Vec<&EntityId> = report.failed_tasks().map(|t| &t.task.created_from).collect();
    failed.sort();
    failed.dedup();
    let mut harvested: Vec<EntityId> = report.tasks.iter().map(|t| t.task.created_from.clone()).collect();
    harvested.sort();
    harvested.dedup();
    for id in harvested.into_iter().filter(|id| failed.binary_search(&id).is_err()) {
        if let Some(mut c) = store.kb.company(&id).cloned() {
            c.last_harvested = Some(now);
            store.kb.upsert(Entity::Company(c), PIPELINE_ACTOR, now)?;
        }
    }
    Ok((summary, report))
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CrawlSummary {
    pub companies: usize,
    pub skipped: usize,
    pub pages: usize,
    pub failed_pages: usize,
    pub disallowed: usize,
    pub changed_regions: usize,
    pub assignments: usize,
    pub events: usize,
}

impl CrawlSummary {
    pub fn is_partial_failure(&self) -> bool {
        self.failed_pages > 0
    }
}

/// Crawl workers run in parallel across companies; politeness is enforced
/// per host by the fetcher.
const CRAWL_WORKERS: usize = 8;

fn crawl_all(
    companies: &[CompanyEntity],
    fetcher: &dyn Fetcher,
    snapshots: &SnapshotStore,
    clock: &dyn Clock,
    config: &PipelineConfig,
) -> Vec<Result<CompanyCrawl, SnapshotError>> {
    let robots = RobotsCache::new();
    let next = AtomicUsize::new(0);
    let mut results: Vec<(usize, Result<CompanyCrawl, SnapshotError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..CRAWL_WORKERS.min(companies.len()))
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        let Some(c) = companies.get(i) else {
                            break;
                        };
                        let r = crawl_company(
                            c,
                            fetcher,
                            &robots,
                            &config.crawl.scorer,
                            &config.crawl.limits,
                            snapshots,
                            clock,
                        );
                        done.push((i, r));
                    }
                    done
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("crawl worker panicked"))
            .collect()
    });
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}

/// Crawl company websites, extract facts and raise change events.
///
/// Pages are fetched in parallel; extraction and proposal then run in
/// company-id order so the outcome does not depend on thread timing.
pub fn crawl(
    store: &mut Store,
    fetcher: &dyn Fetcher,
    clock: &dyn Clock,
    config: &PipelineConfig,
    company: Option<&EntityId>,
) -> Result<(CrawlSummary, Vec<ChangeEvent>), PipelineError> {
    check_company(&store.kb, company)?;
    let snapshots = SnapshotStore::new(&config.kb.snapshots);
    let companies: Vec<CompanyEntity> = store
        .kb
        .companies()
        .filter(|c| company.is_none_or(|id| &c.id == id))
        .cloned()
        .collect();
    let crawls = crawl_all(&companies, fetcher, &snapshots, clock, config);

    let gazetteer = Gazetteer::build(&store.kb, config.extract.weights);
    let extractor = format!("trialkb-slots/{}", crate::COMPONENT_VERSION);
    let mut summary = CrawlSummary {
        companies: companies.len(),
        ..Default::default()
    };
    let mut events = Vec::new();
    for result in crawls {
        let crawl = result?;
        if crawl.skipped.is_some() {
            summary.skipped += 1;
            continue;
        }
        summary.pages += crawl.snapshots.len();
        summary.failed_pages += crawl.snapshots.iter().filter(|s| !s.is_success()).count();
        summary.disallowed += crawl.disallowed.len();
        summary.changed_regions += crawl.changes.len();
        let assignments: Vec<SlotAssignment> = crawl
            .snapshots
            .iter()
            .flat_map(|s| page_assignments(s, &crawl.company_id, &gazetteer, &store.kb, config))
            .collect();
        summary.assignments += assignments.len();
        let fetched_at = crawl.snapshots.iter().map(|s| s.fetched_at).max().unwrap_or_else(|| clock.now());
        let ctx = ProposalContext {
            fetched_at,
            extractor: &extractor,
            changes: &crawl.changes,
            actor: PIPELINE_ACTOR,
            at: clock.now(),
        };
        let raised = propose_changes(&assignments, &mut store.kb, &mut store.events, &config.fusion, &ctx);
        summary.events += raised.len();
        events.extend(raised);
    }
    Ok((summary, events))
}
