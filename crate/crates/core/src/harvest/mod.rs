//! Deep-web acquisition from registry query interfaces.
//!
//! The harvester plans one query per company, pages through each registry
//! result list, filters empty pages, never fetches a URL twice per run and
//! parses raw records. It never writes to the knowledge base; parsed
//! records are handed back in plan order for fusion.

pub mod adapter;
pub mod canon;
pub mod execute;
pub mod parse;
pub mod plan;

use std::collections::BTreeMap;

use serde_json::Value;

use crate::extract::phase::PhaseTable;
use crate::fetch::{host_key, Fetcher};
use crate::kb::KnowledgeBase;
use crate::model::{ClinicalTrialRecord, EntityId};
use crate::time::Clock;

pub use adapter::{is_empty_result, parse_page, AdapterRegistry, ResultPage, SourceAdapter};
pub use canon::{canonicalize_url, dedup, SeenSet, UrlError};
pub use execute::{execute_query, ExecuteOptions, QueryFailure, QueryRun, StopReason};
pub use parse::{parse_trial_record, ParseError};
pub use plan::{generate_query_plan, query_term, PlanOptions, QueryTask};

#[derive(Debug, Clone, Default)]
pub struct HarvestOptions {
    pub execute: ExecuteOptions,
    pub plan: PlanOptions,
    /// Restrict the plan to one company.
    pub company: Option<EntityId>,
}

#[derive(Debug, Clone)]
pub struct TaskResult {
    pub task: QueryTask,
    pub run: QueryRun,
    /// Set when the task still failed after its single re-queue.
    pub failure: Option<String>,
    pub requeued: bool,
}

/// A raw record that could not be parsed.
#[derive(Debug, Clone)]
pub struct RejectedRecord {
    pub adapter_id: String,
    pub page_url: String,
    pub raw: Value,
    pub error: ParseError,
}

#[derive(Debug, Clone, Default)]
pub struct HarvestReport {
    pub tasks: Vec<TaskResult>,
    /// Parsed records in plan order; a record matching several terms
    /// appears once per matching task.
    pub records: Vec<ClinicalTrialRecord>,
    pub rejected: Vec<RejectedRecord>,
}

impl HarvestReport {
    pub fn fetches(&self) -> usize {
        self.tasks.iter().map(|t| t.run.fetches).sum()
    }

    pub fn failed_tasks(&self) -> impl Iterator<Item = &TaskResult> {
        self.tasks.iter().filter(|t| t.failure.is_some())
    }
}

/// Every task for every adapter, tagged with its plan position.
pub fn plan_all(
    kb: &KnowledgeBase,
    adapters: &[&SourceAdapter],
    options: &HarvestOptions,
) -> Vec<QueryTask> {
    let mut tasks = Vec::new();
    for adapter in adapters {
        let mut plan = generate_query_plan(kb, adapter, options.plan);
        if let Some(only) = &options.company {
            plan.retain(|t| &t.created_from == only);
        }
        tasks.extend(plan);
    }
    tasks
}

/// A planned task: its index in the plan, the task and an optional start page.
type PlannedTask = (usize, QueryTask, Option<u32>);

struct Outcome {
    index: usize,
    run: QueryRun,
    failure: Option<QueryFailure>,
}

fn run_tasks(
    tasks: &[PlannedTask],
    adapters: &BTreeMap<&str, &SourceAdapter>,
    fetcher: &dyn Fetcher,
    seen: &SeenSet,
    options: &ExecuteOptions,
) -> Vec<Outcome> {
    // One worker per host: strictly serial per host, parallel across hosts.
    let mut by_host: BTreeMap<String, Vec<&PlannedTask>> = BTreeMap::new();
    for t in tasks {
        let adapter = adapters[t.1.adapter_id.as_str()];
        let host = adapter
            .page_url(&t.1.query_term, adapter.pagination.first_page)
            .map(|u| host_key(&u))
            .unwrap_or_default();
        by_host.entry(host).or_default().push(t);
    }
    let mut outcomes: Vec<Outcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = by_host
            .into_values()
            .map(|group| {
                scope.spawn(move || {
                    group
                        .into_iter()
                        .map(|(index, task, start)| {
                            let adapter = adapters[task.adapter_id.as_str()];
                            match execute_query(task, adapter, fetcher, seen, options, *start) {
                                Ok(run) => Outcome {
                                    index: *index,
                                    run,
                                    failure: None,
                                },
                                Err(f) => Outcome {
                                    index: *index,
                                    run: (*f.partial).clone(),
                                    failure: Some(f),
                                },
                            }
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("harvest worker panicked"))
            .collect()
    });
    outcomes.sort_by_key(|o| o.index);
    outcomes
}

/// Plan, fetch and parse. Failed tasks are re-queued once, resuming at the
/// page that failed.
pub fn run_harvest(
    kb: &KnowledgeBase,
    adapters: &[&SourceAdapter],
    fetcher: &dyn Fetcher,
    phases: &PhaseTable,
    clock: &dyn Clock,
    options: &HarvestOptions,
) -> HarvestReport {
    let by_id: BTreeMap<&str, &SourceAdapter> =
        adapters.iter().map(|a| (a.adapter_id.as_str(), *a)).collect();
    let tasks = plan_all(kb, adapters, options);
    let seen = SeenSet::new();
    let first: Vec<_> = tasks.iter().cloned().enumerate().map(|(i, t)| (i, t, None)).collect();
    let mut results: Vec<TaskResult> = Vec::new();
    let mut retry = Vec::new();
    for o in run_tasks(&first, &by_id, fetcher, &seen, &options.execute) {
        if let Some(f) = &o.failure {
            tracing::warn!(term = f.term, page = f.page, error = %f.error, "task failed, re-queued");
            retry.push((o.index, tasks[o.index].clone(), Some(f.page)));
        }
        results.push(TaskResult {
            task: tasks[o.index].clone(),
            run: o.run,
            failure: None,
            requeued: o.failure.is_some(),
        });
    }
    for o in run_tasks(&retry, &by_id, fetcher, &seen, &options.execute) {
        let r = &mut results[o.index];
        r.run.pages.extend(o.run.pages);
        r.run.skipped.extend(o.run.skipped);
        r.run.fetches += o.run.fetches;
        r.run.stop = o.run.stop;
        if let Some(f) = o.failure {
            tracing::error!(term = f.term, page = f.page, error = %f.error, "task failed after re-queue");
            r.failure = Some(f.to_string());
        }
    }

    let mut report = HarvestReport::default();
    for r in &results {
        let adapter = by_id[r.task.adapter_id.as_str()];
        for page in &r.run.pages {
            for raw in &page.records {
                match parse_trial_record(raw, adapter, phases, &page.url, clock.now()) {
                    Ok(rec) => report.records.push(rec),
                    Err(error) => report.rejected.push(RejectedRecord {
                        adapter_id: adapter.adapter_id.clone(),
                        page_url: page.url.clone(),
                        raw: raw.clone(),
                        error,
                    }),
                }
            }
        }
    }
    report.tasks = results;
    report
}
