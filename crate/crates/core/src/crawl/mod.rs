//! Focused crawling of company websites.
//!
//! A crawl starts at the company homepage, fetches pages in descending
//! link-score order within page and depth budgets, honors robots.txt,
//! stays on the seed's registrable domain and snapshots every page so the
//! next run can detect changes.

pub mod classify;
pub mod diff;
pub mod frontier;
pub mod html;
pub mod robots;
pub mod score;
pub mod snapshot;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::fetch::{host_key, FetchError, FetchResponse, Fetcher, USER_AGENT};
use crate::harvest::canonicalize_url;
use crate::model::{CompanyEntity, EntityId};
use crate::time::Clock;

pub use classify::{classify_page, PageClass};
pub use diff::{detect_changes, ChangedRegion};
pub use frontier::{Frontier, FrontierItem};
pub use robots::{RobotsCache, RobotsPolicy, RobotsTxt};
pub use score::{registrable_domain, LinkScorer};
pub use snapshot::{PageSnapshot, SnapshotError, SnapshotStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrawlLimits {
    pub max_pages: usize,
    pub max_depth: u32,
}

impl Default for CrawlLimits {
    fn default() -> Self {
        CrawlLimits {
            max_pages: 25,
            max_depth: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SeedError {
    #[error("company {0} has no website; skipped")]
    NoWebsite(EntityId),
    #[error("company {id} website `{url}` is not a valid URL")]
    BadWebsite { id: EntityId, url: String },
}

/// Frontier holding the company's homepage at depth 0, score 1.0.
pub fn seed_crawl(company: &CompanyEntity, max_depth: u32) -> Result<Frontier, SeedError> {
    let site = company
        .website
        .as_deref()
        .ok_or_else(|| SeedError::NoWebsite(company.id.clone()))?;
    let url = canonicalize_url(site).map_err(|_| SeedError::BadWebsite {
        id: company.id.clone(),
        url: site.to_string(),
    })?;
    let mut f = Frontier::new(max_depth);
    f.push(FrontierItem {
        url,
        depth: 0,
        score: 1.0,
        discovered_from: None,
    });
    Ok(f)
}

#[derive(Debug, Clone, Default)]
pub struct CrawlOutcome {
    /// In fetch order.
    pub snapshots: Vec<PageSnapshot>,
    /// Frontier URLs skipped because robots rules disallow them.
    pub disallowed: Vec<String>,
}

fn path_and_query(url: &str) -> String {
    match Url::parse(url) {
        Ok(u) => match u.query() {
            Some(q) => format!("{}?{q}", u.path()),
            None => u.path().to_string(),
        },
        Err(_) => "/".to_string(),
    }
}

/// Resolve the robots policy for the URL's host, fetching it on first use.
pub fn robots_policy(url: &str, fetcher: &dyn Fetcher, cache: &RobotsCache) -> RobotsPolicy {
    let host = host_key(url);
    if let Some(p) = cache.get(&host) {
        return p;
    }
    let policy = match Url::parse(url).and_then(|u| u.join("/robots.txt")) {
        Ok(robots_url) => match fetcher.fetch(robots_url.as_str()) {
            Ok(resp) => RobotsPolicy::from_fetch(Some(resp.status), &resp.body, USER_AGENT),
            Err(_) => RobotsPolicy::from_fetch(None, b"", USER_AGENT),
        },
        Err(_) => RobotsPolicy::DisallowAll,
    };
    cache.insert(&host, policy.clone());
    policy
}

/// A timeout is retried once; any other failure is final.
fn fetch_page(fetcher: &dyn Fetcher, url: &str) -> Result<FetchResponse, FetchError> {
    match fetcher.fetch(url) {
        Err(FetchError::Timeout(_)) => fetcher.fetch(url),
        other => other,
    }
}

/// Fetch pages of one company in frontier order until the page budget is
/// spent or the frontier is empty.
pub fn crawl(
    company_id: &EntityId,
    mut frontier: Frontier,
    fetcher: &dyn Fetcher,
    robots: &RobotsCache,
    scorer: &LinkScorer,
    limits: &CrawlLimits,
    clock: &dyn Clock,
) -> CrawlOutcome {
    let mut out = CrawlOutcome::default();
    let seed_domain = frontier
        .ordered()
        .first()
        .and_then(|i| Url::parse(&i.url).ok())
        .and_then(|u| u.host_str().map(registrable_domain))
        .unwrap_or_default();
    while out.snapshots.len() < limits.max_pages {
        let Some(item) = frontier.pop() else {
            break;
        };
        if !robots_policy(&item.url, fetcher, robots).allows(&path_and_query(&item.url)) {
            tracing::debug!(url = item.url, "disallowed by robots.txt");
            out.disallowed.push(item.url);
            continue;
        }
        let snap = match fetch_page(fetcher, &item.url) {
            Ok(resp) if resp.is_success() => {
                PageSnapshot::new(&item.url, company_id, clock.now(), resp.status, resp.body)
            }
            Ok(resp) => PageSnapshot::new(&item.url, company_id, clock.now(), resp.status, Vec::new()),
            Err(e) => {
                tracing::warn!(url = item.url, error = %e, "page fetch failed");
                PageSnapshot::new(&item.url, company_id, clock.now(), 0, Vec::new())
            }
        };
        if snap.is_success() && item.depth < frontier.max_depth() {
            if let Ok(body) = std::str::from_utf8(&snap.body) {
                for (link, anchor) in html::extract_links(body, &item.url) {
                    let Ok(link) = canonicalize_url(&link) else {
                        continue;
                    };
                    if !score::same_site(&link, &seed_domain) {
                        continue;
                    }
                    let score = scorer.score(&link, &anchor, &seed_domain);
                    frontier.push(FrontierItem {
                        url: link,
                        depth: item.depth + 1,
                        score,
                        discovered_from: Some(item.url.clone()),
                    });
                }
            }
        }
        out.snapshots.push(snap);
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct CompanyCrawl {
    pub company_id: EntityId,
    pub snapshots: Vec<PageSnapshot>,
    pub changes: Vec<ChangedRegion>,
    pub disallowed: Vec<String>,
    /// Set when the company could not be crawled at all.
    pub skipped: Option<String>,
}

/// Seed, crawl, store snapshots and diff each page against its predecessor.
#[allow(clippy::too_many_arguments)]
pub fn crawl_company(
    company: &CompanyEntity,
    fetcher: &dyn Fetcher,
    robots: &RobotsCache,
    scorer: &LinkScorer,
    limits: &CrawlLimits,
    store: &SnapshotStore,
    clock: &dyn Clock,
) -> Result<CompanyCrawl, SnapshotError> {
    let mut result = CompanyCrawl {
        company_id: company.id.clone(),
        ..Default::default()
    };
    let frontier = match seed_crawl(company, limits.max_depth) {
        Ok(f) => f,
        Err(e) => {
            tracing::info!(company = %company.id, "{e}");
            result.skipped = Some(e.to_string());
            return Ok(result);
        }
    };
    let outcome = crawl(&company.id, frontier, fetcher, robots, scorer, limits, clock);
    for snap in &outcome.snapshots {
        if let Some(prev) = store.put(snap)? {
            result.changes.extend(detect_changes(&prev, snap, clock.now()));
        }
    }
    result.snapshots = outcome.snapshots;
    result.disallowed = outcome.disallowed;
    Ok(result)
}
