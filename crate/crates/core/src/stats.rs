//! Pipeline statistics computed by full enumeration of the KB.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crawl::SnapshotStore;
use crate::kb::KnowledgeBase;
use crate::model::TrialStatus;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total_trials: u64,
    /// Trials with at least one sponsor linked to a KB company.
    pub linked_trials: u64,
    pub completed_trials: u64,
    /// `completed_trials / total_trials`, unrounded; 0 for an empty KB.
    pub completed_fraction: f64,
    pub crawled_pages: u64,
    pub distinct_companies: u64,
    /// Personnel links held by KB companies. Every link passed review.
    pub personnel_records: u64,
}

impl StatsReport {
    /// Build a report from raw counts, deriving the completed fraction.
    pub fn from_counts(
        total_trials: u64,
        linked_trials: u64,
        completed_trials: u64,
        crawled_pages: u64,
        distinct_companies: u64,
        personnel_records: u64,
    ) -> Self {
        let completed_fraction = if total_trials == 0 {
            0.0
        } else {
            completed_trials as f64 / total_trials as f64
        };
        StatsReport {
            total_trials,
            linked_trials,
            completed_trials,
            completed_fraction,
            crawled_pages,
            distinct_companies,
            personnel_records,
        }
    }

    /// The completed fraction as a percentage with one decimal, e.g. `7.4%`.
    pub fn completed_percent(&self) -> String {
        format!("{:.1}%", self.completed_fraction * 100.0)
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total_trials: {}", self.total_trials)?;
        writeln!(f, "linked_trials: {}", self.linked_trials)?;
        writeln!(
            f,
            "completed_trials: {} ({})",
            self.completed_trials,
            self.completed_percent()
        )?;
        writeln!(f, "crawled_pages: {}", self.crawled_pages)?;
        writeln!(f, "distinct_companies: {}", self.distinct_companies)?;
        writeln!(f, "personnel_records: {}", self.personnel_records)
    }
}

/// Count everything in the KB; crawled pages come from the snapshot store
/// when one is given.
pub fn compute_stats(kb: &KnowledgeBase, snapshots: Option<&SnapshotStore>) -> StatsReport {
    let mut total = 0;
    let mut linked = 0;
    let mut completed = 0;
    for t in kb.trials() {
        total += 1;
        if !t.sponsor_links.is_empty() {
            linked += 1;
        }
        if t.status == TrialStatus::Completed {
            completed += 1;
        }
    }
    let personnel = kb.companies().map(|c| c.personnel.len() as u64).sum();
    StatsReport::from_counts(
        total,
        linked,
        completed,
        snapshots.map_or(0, |s| s.count() as u64),
        kb.companies().count() as u64,
        personnel,
    )
}
