//! Running one query task: pagination, retries and empty-page detection.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::fetch::{FetchError, Fetcher};

use super::adapter::{is_empty_result, parse_page, ResultPage, SourceAdapter};
use super::canon::{canonicalize_url, SeenSet};
use super::plan::QueryTask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecuteOptions {
    /// Attempts per page before the task is marked failed.
    pub attempts: u32,
    /// First backoff delay; doubles per retry.
    pub backoff_base_ms: u64,
    /// Consecutive skipped pages after which pagination gives up.
    pub max_consecutive_bad_pages: u32,
}

impl Default for ExecuteOptions {
    fn default() -> Self {
        ExecuteOptions {
            attempts: 3,
            backoff_base_ms: 250,
            max_consecutive_bad_pages: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EmptyPage,
    CountExhausted,
    /// The next page URL was already fetched in this run.
    AlreadySeen,
    TooManyBadPages,
    MaxPages,
}

#[derive(Debug, Clone, Default)]
pub struct QueryRun {
    pub pages: Vec<ResultPage>,
    /// Page numbers skipped as malformed or client errors.
    pub skipped: Vec<u32>,
    pub fetches: usize,
    pub stop: Option<StopReason>,
}

impl QueryRun {
    pub fn record_count(&self) -> usize {
        self.pages.iter().map(|p| p.records.len()).sum()
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("task `{term}` failed at page {page}: {error}")]
pub struct QueryFailure {
    pub term: String,
    pub page: u32,
    pub error: FetchError,
    /// Pages retrieved before the failure.
    pub partial: Box<QueryRun>,
}

/// Fetch with retries; 5xx responses count as transport failures.
fn fetch_with_retry(
    fetcher: &dyn Fetcher,
    url: &str,
    options: &ExecuteOptions,
    fetches: &mut usize,
) -> Result<crate::fetch::FetchResponse, FetchError> {
    let mut last_err = None;
    for attempt in 0..options.attempts.max(1) {
        if attempt > 0 {
            let wait = options.backoff_base_ms.saturating_mul(1 << (attempt - 1));
            std::thread::sleep(Duration::from_millis(wait));
        }
        *fetches += 1;
        match fetcher.fetch(url) {
            Ok(resp) if resp.status >= 500 => {
                last_err = Some(FetchError::Transport {
                    url: url.to_string(),
                    reason: format!("HTTP {}", resp.status),
                });
            }
            Ok(resp) => return Ok(resp),
            Err(e) => last_err = Some(e),
        }
        tracing::debug!(url, attempt, "fetch attempt failed");
    }
    Err(last_err.expect("at least one attempt"))
}

/// Follow pagination for one task starting at `start_page`.
///
/// Stops at the first empty page, once the declared count is covered, or
/// when the next page URL is already in `seen`. Malformed pages and 4xx
/// responses are skipped with a warning.
pub fn execute_query(
    task: &QueryTask,
    adapter: &SourceAdapter,
    fetcher: &dyn Fetcher,
    seen: &SeenSet,
    options: &ExecuteOptions,
    start_page: Option<u32>,
) -> Result<QueryRun, QueryFailure> {
    let first = adapter.pagination.first_page;
    let start = start_page.unwrap_or(first);
    let last = first.saturating_add(adapter.pagination.max_pages);
    let mut run = QueryRun::default();
    let mut bad_streak = 0;
    let mut declared: Option<u64> = None;
    let mut page = start;
    while page < last {
        let url = adapter
            .page_url(&task.query_term, page)
            .ok()
            .and_then(|u| canonicalize_url(&u).ok());
        let Some(url) = url else {
            tracing::warn!(term = task.query_term, page, "cannot build page URL");
            run.skipped.push(page);
            run.stop = Some(StopReason::TooManyBadPages);
            return Ok(run);
        };
        if !seen.insert(&url) {
            run.stop = Some(StopReason::AlreadySeen);
            return Ok(run);
        }
        let resp = match fetch_with_retry(fetcher, &url, options, &mut run.fetches) {
            Ok(r) => r,
            Err(error) => {
                // Forget the claim so the re-queued task may fetch it again.
                seen.remove(&url);
                return Err(QueryFailure {
                    term: task.query_term.clone(),
                    page,
                    error,
                    partial: Box::new(run),
                });
            }
        };
        let parsed = if resp.is_success() {
            parse_page(&url, &resp.body, adapter).map_err(|e| e.to_string())
        } else {
            Err(format!("HTTP {}", resp.status))
        };
        match parsed {
            Ok(p) => {
                bad_streak = 0;
                if p.declared_count.is_some() {
                    declared = p.declared_count;
                }
                let empty = is_empty_result(&p, adapter);
                run.pages.push(p);
                if empty {
                    run.stop = Some(StopReason::EmptyPage);
                    return Ok(run);
                }
                if declared.is_some_and(|d| run.record_count() as u64 + skipped_records(start, first, adapter) >= d) {
                    run.stop = Some(StopReason::CountExhausted);
                    return Ok(run);
                }
            }
            Err(reason) => {
                tracing::warn!(url, reason, "skipping result page");
                run.skipped.push(page);
                bad_streak += 1;
                if bad_streak >= options.max_consecutive_bad_pages {
                    run.stop = Some(StopReason::TooManyBadPages);
                    return Ok(run);
                }
            }
        }
        page += 1;
    }
    run.stop = Some(StopReason::MaxPages);
    Ok(run)
}

/// Records on pages before a resumed start, assumed full.
fn skipped_records(start: u32, first: u32, adapter: &SourceAdapter) -> u64 {
    u64::from(start.saturating_sub(first)) * u64::from(adapter.pagination.page_size)
}
