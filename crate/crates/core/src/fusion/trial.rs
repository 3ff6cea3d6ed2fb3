//! Trial record linkage and fusion.
//!
//! Registry data is authoritative: new trials are created and existing ones
//! updated without review, but only by records with a newer `last_update`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::kb::KnowledgeBase;
use crate::model::{ClinicalTrialRecord, Entity, EntityId};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FusionOutcome {
    Created { id: EntityId },
    Updated { id: EntityId, fields: Vec<String> },
    Unchanged { id: EntityId },
    Quarantined { reason: String },
}

impl FusionOutcome {
    pub fn kind(&self) -> &'static str {
        match self {
            FusionOutcome::Created { .. } => "created",
            FusionOutcome::Updated { .. } => "updated",
            FusionOutcome::Unchanged { .. } => "unchanged",
            FusionOutcome::Quarantined { .. } => "quarantined",
        }
    }
}

/// Exact match on `(source, registry_id)`.
pub fn match_trial(record: &ClinicalTrialRecord, kb: &KnowledgeBase) -> Option<EntityId> {
    let id = record.identity();
    kb.trial(&id).map(|_| id)
}

/// Top-level fields that differ, ignoring `id` and `provenance`.
pub fn changed_fields(old: &ClinicalTrialRecord, new: &ClinicalTrialRecord) -> Vec<String> {
    let a = serde_json::to_value(old).expect("trial serializes");
    let b = serde_json::to_value(new).expect("trial serializes");
    let (Value::Object(a), Value::Object(b)) = (a, b) else {
        return Vec::new();
    };
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter(|k| *k != "id" && *k != "provenance")
        .filter(|k| a.get(*k) != b.get(*k))
        .cloned()
        .collect()
}

fn union_links(existing: &[EntityId], incoming: &[EntityId]) -> Vec<EntityId> {
    let mut out = existing.to_vec();
    for l in incoming {
        if !out.contains(l) {
            out.push(l.clone());
        }
    }
    out
}

/// Create, update or leave a trial. Invalid records are reported as
/// quarantined and the KB is not touched.
pub fn fuse_trial(record: &ClinicalTrialRecord, kb: &mut KnowledgeBase, actor: &str, at: Timestamp) -> FusionOutcome {
    let mut record = record.clone();
    record.id = record.identity();
    if let Err(e) = kb.validate_trial(&record) {
        return FusionOutcome::Quarantined { reason: e.to_string() };
    }
    let Some(existing) = match_trial(&record, kb).and_then(|id| kb.trial(&id).cloned()) else {
        return match kb.upsert(Entity::Trial(record), actor, at) {
            Ok(id) => FusionOutcome::Created { id },
            Err(e) => FusionOutcome::Quarantined { reason: e.to_string() },
        };
    };
    let id = existing.id.clone();
    let merged = if record.last_update > existing.last_update {
        let links = union_links(&existing.sponsor_links, &record.sponsor_links);
        ClinicalTrialRecord {
            sponsor_links: links,
            ..record
        }
    } else if record.last_update == existing.last_update {
        ClinicalTrialRecord {
            sponsor_links: union_links(&existing.sponsor_links, &record.sponsor_links),
            ..existing.clone()
        }
    } else {
        return FusionOutcome::Unchanged { id };
    };
    let fields = changed_fields(&existing, &merged);
    if fields.is_empty() {
        return FusionOutcome::Unchanged { id };
    }
    match kb.upsert(Entity::Trial(merged), actor, at) {
        Ok(id) => FusionOutcome::Updated { id, fields },
        Err(e) => FusionOutcome::Quarantined { reason: e.to_string() },
    }
}

/// Counts per outcome kind for a fused batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionSummary {
    pub created: usize,
    pub updated: usize,
    pub unchanged: usize,
    pub quarantined: usize,
}

impl FusionSummary {
    pub fn add(&mut self, outcome: &FusionOutcome) {
        match outcome {
            FusionOutcome::Created { .. } => self.created += 1,
            FusionOutcome::Updated { .. } => self.updated += 1,
            FusionOutcome::Unchanged { .. } => self.unchanged += 1,
            FusionOutcome::Quarantined { .. } => self.quarantined += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.created + self.updated + self.unchanged + self.quarantined
    }
}
