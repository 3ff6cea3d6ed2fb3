//! Query planning from knowledge-base background knowledge.
//!
//! One task per company, stalest first: companies never harvested lead, the
//! rest follow by ascending `last_harvested`, ties broken by company id.

use serde::{Deserialize, Serialize};

use crate::extract::variants::strip_legal_suffix;
use crate::kb::KnowledgeBase;
use crate::model::{CompanyEntity, EntityId};
use crate::time::Timestamp;

use super::adapter::SourceAdapter;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryTask {
    pub adapter_id: String,
    pub query_term: String,
    /// Position in the plan, 0 first.
    pub priority: usize,
    pub created_from: EntityId,
}

/// The registry search term for a company: its name without the legal
/// suffix, since registries spell suffixes inconsistently.
pub fn query_term(company: &CompanyEntity) -> String {
    let stripped = strip_legal_suffix(&company.canonical_name);
    if stripped.chars().count() >= 3 {
        stripped
    } else {
        company.canonical_name.trim().to_string()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PlanOptions {
    /// With `(now, horizon_secs)`, companies harvested within the horizon are
    /// skipped, provided the adapter reports record update dates.
    pub resync: Option<(Timestamp, i64)>,
}

pub fn generate_query_plan(kb: &KnowledgeBase, adapter: &SourceAdapter, options: PlanOptions) -> Vec<QueryTask> {
    let mut companies: Vec<&CompanyEntity> = kb.companies().collect();
    if let Some((now, horizon)) = options.resync.filter(|_| adapter.supports_incremental()) {
        companies.retain(|c| c.last_harvested.is_none_or(|t| now.unix() - t.unix() >= horizon));
    }
    // `None` sorts before `Some`, which puts never-harvested companies first.
    companies.sort_by(|a, b| {
        a.last_harvested
            .cmp(&b.last_harvested)
            .then_with(|| a.id.cmp(&b.id))
    });
    companies
        .into_iter()
        .enumerate()
        .map(|(priority, c)| QueryTask {
            adapter_id: adapter.adapter_id.clone(),
            query_term: query_term(c),
            priority,
            created_from: c.id.clone(),
        })
        .collect()
}
