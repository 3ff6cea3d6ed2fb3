//! Change events: proposed edits to curated fields awaiting review.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{EntityId, Provenance};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventStatus {
    Pending,
    Accepted,
    Rejected,
}

impl EventStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventStatus::Pending => "pending",
            EventStatus::Accepted => "accepted",
            EventStatus::Rejected => "rejected",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pending" => Some(EventStatus::Pending),
            "accepted" => Some(EventStatus::Accepted),
            "rejected" => Some(EventStatus::Rejected),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventEvidence {
    pub provenance: Provenance,
    /// Verbatim text the value was extracted from.
    pub excerpt: String,
    /// Text before and after, when the page changed since the last crawl.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_excerpt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub event_id: String,
    /// Monotone position in the event log; the paging cursor.
    pub seq: u64,
    pub entity_id: EntityId,
    pub field: String,
    pub old_value: Value,
    pub new_value: Value,
    pub evidence: EventEvidence,
    pub status: EventStatus,
    pub created_at: Timestamp,
    pub decided_by: Option<String>,
    pub decided_at: Option<Timestamp>,
}

/// Field paths that events may target.
pub const FIELD_PHONES: &str = "phones";
pub const FIELD_CEO: &str = "personnel.ceo";
pub const FIELD_KEY_PERSON: &str = "personnel";

/// Ordered event log. Events are appended and then only change status.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<ChangeEvent>,
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    pub fn from_events(mut events: Vec<ChangeEvent>) -> Self {
        events.sort_by_key(|e| e.seq);
        EventLog { events }
    }

    pub fn events(&self) -> &[ChangeEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ChangeEvent> {
        self.events.iter().find(|e| e.event_id == id)
    }

    pub(crate) fn get_mut(&mut self, id: &str) -> Option<&mut ChangeEvent> {
        self.events.iter_mut().find(|e| e.event_id == id)
    }

    pub fn has_pending(&self, entity: &EntityId, field: &str, new_value: &Value) -> bool {
        self.events.iter().any(|e| {
            e.status == EventStatus::Pending
                && &e.entity_id == entity
                && e.field == field
                && &e.new_value == new_value
        })
    }

    /// Append a pending event, assigning its id and sequence number.
    pub fn push(
        &mut self,
        entity_id: EntityId,
        field: &str,
        old_value: Value,
        new_value: Value,
        evidence: EventEvidence,
        at: Timestamp,
    ) -> &ChangeEvent {
        let seq = self.events.last().map_or(1, |e| e.seq + 1);
        self.events.push(ChangeEvent {
            event_id: format!("evt-{seq:06}"),
            seq,
            entity_id,
            field: field.to_string(),
            old_value,
            new_value,
            evidence,
            status: EventStatus::Pending,
            created_at: at,
            decided_by: None,
            decided_at: None,
        });
        self.events.last().expect("just pushed")
    }

    pub fn count(&self, status: EventStatus) -> usize {
        self.events.iter().filter(|e| e.status == status).count()
    }
}
