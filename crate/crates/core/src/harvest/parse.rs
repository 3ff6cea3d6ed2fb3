//! Mapping raw registry records onto [`ClinicalTrialRecord`].

use chrono::NaiveDate;
use serde_json::Value;

use crate::extract::phase::PhaseTable;
use crate::model::{ClinicalTrialRecord, EntityId, Provenance, TrialStatus};
use crate::time::Timestamp;

use super::adapter::{lookup_path, SourceAdapter};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("record lacks required field `{0}`")]
    MissingField(String),
    #[error("record is not an object")]
    NotAnObject,
}

/// Text of a scalar, or the `", "`-joined texts of a list of scalars.
fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.trim().to_string()).filter(|s| !s.is_empty()),
        Value::Number(n) => Some(n.to_string()),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().filter_map(text_of).collect();
            (!parts.is_empty()).then(|| parts.join(", "))
        }
        Value::Object(map) => map.get("name").and_then(text_of),
        _ => None,
    }
}

fn list_of(v: &Value) -> Vec<String> {
    match v {
        Value::Array(items) => items.iter().filter_map(text_of).collect(),
        other => text_of(other).into_iter().collect(),
    }
}

/// Accepts `YYYY-MM-DD`, a longer ISO timestamp, or `YYYY-MM` (first of month).
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    if let Some(head) = raw.get(..10) {
        if let Ok(d) = NaiveDate::parse_from_str(head, "%Y-%m-%d") {
            return Some(d);
        }
    }
    NaiveDate::parse_from_str(&format!("{raw}-01"), "%Y-%m-%d").ok()
}

/// Convert one raw record. `page_url` is the provenance fallback when the
/// adapter has no per-record URL.
pub fn parse_trial_record(
    raw: &Value,
    adapter: &SourceAdapter,
    phases: &PhaseTable,
    page_url: &str,
    fetched_at: Timestamp,
) -> Result<ClinicalTrialRecord, ParseError> {
    if !raw.is_object() {
        return Err(ParseError::NotAnObject);
    }
    let field = |name: &str| {
        adapter
            .parser
            .fields
            .get(name)
            .and_then(|path| lookup_path(raw, path))
    };
    let registry_id = field("registry_id")
        .and_then(text_of)
        .ok_or_else(|| ParseError::MissingField("registry_id".into()))?;
    let phase = phases.normalize(&field("phase").and_then(text_of).unwrap_or_default());
    let status = field("status")
        .and_then(text_of)
        .map_or(TrialStatus::Unknown, |s| TrialStatus::from_registry(&s));
    let mut sponsors: Vec<String> = field("lead_sponsor").and_then(text_of).into_iter().collect();
    if let Some(c) = field("collaborators") {
        sponsors.extend(list_of(c));
    }
    let last_update = match field("last_update").and_then(text_of) {
        Some(s) => {
            let d = parse_date(&s);
            if d.is_none() {
                tracing::warn!(registry_id, raw = s, "unparseable last_update");
            }
            d
        }
        None => None,
    };
    let source_url = adapter
        .record_url(&registry_id)
        .unwrap_or_else(|| page_url.to_string());
    Ok(ClinicalTrialRecord {
        id: EntityId::trial(&adapter.adapter_id, &registry_id),
        title: field("title").and_then(text_of),
        phase,
        status,
        sponsors,
        sponsor_links: Vec::new(),
        conditions: field("conditions").map(list_of).unwrap_or_default(),
        interventions: field("interventions").map(list_of).unwrap_or_default(),
        last_update,
        provenance: Provenance {
            source_url,
            fetched_at,
            extractor: format!("harvest/{}@{}", adapter.adapter_id, crate::COMPONENT_VERSION),
        },
        source: adapter.adapter_id.clone(),
        registry_id,
    })
}
