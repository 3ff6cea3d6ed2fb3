//! Turning slot assignments into KB edits or review events, and applying
//! review decisions.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::crawl::ChangedRegion;
use crate::extract::slots::{Role, SlotAssignment, SlotValue};
use crate::kb::{KbError, KnowledgeBase};
use crate::model::{Affiliation, Entity, EntityId, PersonEntity, PersonnelLink, Provenance};
use crate::time::Timestamp;

use super::events::{
    ChangeEvent, Decision, EventEvidence, EventLog, EventStatus, FIELD_CEO, FIELD_KEY_PERSON, FIELD_PHONES,
};
use super::{MergePolicy, Policy};

/// Role label stored on personnel links for the chief executive.
pub const CEO_ROLE: &str = "CEO";

#[derive(Debug, thiserror::Error)]
pub enum FusionError {
    #[error("change event `{0}` not found")]
    NotFound(String),
    #[error("change event `{event}` cannot be applied: {source}")]
    Apply {
        event: String,
        #[source]
        source: KbError,
    },
    #[error("change event `{event}` has a malformed value: {reason}")]
    BadValue { event: String, reason: String },
}

/// Where assignments came from, for evidence records.
#[derive(Debug, Clone, Copy)]
pub struct ProposalContext<'a> {
    pub fetched_at: Timestamp,
    pub extractor: &'a str,
    /// Regions that changed since the previous crawl.
    pub changes: &'a [ChangedRegion],
    pub actor: &'a str,
    pub at: Timestamp,
}

fn evidence_for(items: &[&SlotAssignment], ctx: &ProposalContext<'_>) -> EventEvidence {
    let first = items[0];
    let mut excerpts: Vec<&str> = Vec::new();
    for a in items {
        if !excerpts.contains(&a.evidence.excerpt.as_str()) {
            excerpts.push(&a.evidence.excerpt);
        }
    }
    let old_excerpt = ctx
        .changes
        .iter()
        .find(|r| {
            items.iter().any(|a| {
                a.evidence.url == r.url
                    && a.evidence
                        .excerpt
                        .split(" / ")
                        .any(|line| !line.is_empty() && r.new_excerpt.contains(line))
            })
        })
        .map(|r| r.old_excerpt.clone());
    EventEvidence {
        provenance: Provenance {
            source_url: first.evidence.url.clone(),
            fetched_at: ctx.fetched_at,
            extractor: ctx.extractor.to_string(),
        },
        excerpt: excerpts.join("\n"),
        old_excerpt,
    }
}

/// `(person_id or null, full_name)` of a person slot value.
fn person_ref(kb: &KnowledgeBase, v: &SlotValue) -> Option<(Option<EntityId>, String)> {
    match v {
        SlotValue::Entity(id) => kb.person(id).map(|p| (Some(id.clone()), p.full_name.clone())),
        SlotValue::Provisional(name) => match kb.person_by_name(name) {
            Some(p) => Some((Some(p.id.clone()), p.full_name.clone())),
            None => Some((None, name.clone())),
        },
        _ => None,
    }
}

fn person_json(id: &Option<EntityId>, name: &str) -> Value {
    json!({ "person_id": id, "full_name": name })
}

fn current_ceo(kb: &KnowledgeBase, company: &EntityId) -> Value {
    kb.company(company)
        .and_then(|c| c.personnel.iter().find(|l| l.role == CEO_ROLE))
        .map_or(Value::Null, |l| {
            let name = kb.person(&l.person_id).map(|p| p.full_name.clone()).unwrap_or_default();
            person_json(&Some(l.person_id.clone()), &name)
        })
}

fn same_person(a: &Value, b: &Value) -> bool {
    match (a.get("person_id"), b.get("person_id")) {
        (Some(Value::String(x)), Some(Value::String(y))) => x == y,
        _ => a.get("full_name").is_some() && a.get("full_name") == b.get("full_name"),
    }
}

fn has_personnel(kb: &KnowledgeBase, company: &EntityId, person: &(Option<EntityId>, String)) -> bool {
    let Some(c) = kb.company(company) else {
        return false;
    };
    c.personnel.iter().any(|l| match &person.0 {
        Some(id) => &l.person_id == id,
        None => kb.person(&l.person_id).is_some_and(|p| p.full_name == person.1),
    })
}

/// Apply an auto-policy trial assignment directly.
fn apply_auto(a: &SlotAssignment, kb: &mut KnowledgeBase, ctx: &ProposalContext<'_>) -> Result<bool, KbError> {
    let SlotValue::Entity(trial_id) = &a.subject else {
        return Ok(false);
    };
    let Some(mut trial) = kb.trial(trial_id).cloned() else {
        return Ok(false);
    };
    let changed = match (&a.role, &a.object) {
        (Role::PerformedBy, SlotValue::Entity(company)) if !trial.sponsor_links.contains(company) => {
            trial.sponsor_links.push(company.clone());
            true
        }
        (Role::ClinicalPhaseOf, SlotValue::Phase(p)) if trial.phase != *p => {
            trial.phase = *p;
            true
        }
        _ => false,
    };
    if changed {
        kb.upsert(Entity::Trial(trial), ctx.actor, ctx.at)?;
    }
    Ok(changed)
}

/// Emit pending events for curated fields and apply auto-policy facts.
///
/// Phones are compared as the set observed for a company across the batch.
/// An event is raised only when the value differs from the KB and no
/// pending event with the same `(entity, field, new_value)` exists.
pub fn propose_changes(
    assignments: &[SlotAssignment],
    kb: &mut KnowledgeBase,
    log: &mut EventLog,
    policy: &MergePolicy,
    ctx: &ProposalContext<'_>,
) -> Vec<ChangeEvent> {
    let mut created = Vec::new();
    let mut phones: BTreeMap<EntityId, Vec<&SlotAssignment>> = BTreeMap::new();
    let mut ceos: BTreeMap<EntityId, Vec<&SlotAssignment>> = BTreeMap::new();
    let mut key_people: Vec<&SlotAssignment> = Vec::new();
    for a in assignments {
        if policy.policy_for(a.role) == Policy::Auto {
            if let Err(e) = apply_auto(a, kb, ctx) {
                tracing::warn!(error = %e, "auto-applied assignment rejected by KB");
            }
            continue;
        }
        match (&a.role, &a.subject, &a.object) {
            (Role::IsPhoneNumberOf, SlotValue::Entity(c), SlotValue::Phone(_)) => {
                phones.entry(c.clone()).or_default().push(a)
            }
            (Role::ChiefExecutiveOfficerOf, _, SlotValue::Entity(c)) => ceos.entry(c.clone()).or_default().push(a),
            (Role::HasKeyPerson, SlotValue::Entity(_), _) => key_people.push(a),
            _ => {}
        }
    }

    let mut raise = |log: &mut EventLog, entity: EntityId, field: &str, old: Value, new: Value, ev: EventEvidence| {
        if old == new || log.has_pending(&entity, field, &new) {
            return;
        }
        created.push(log.push(entity, field, old, new, ev, ctx.at).clone());
    };

    for (company, items) in phones {
        let Some(c) = kb.company(&company) else {
            continue;
        };
        let mut observed: Vec<String> = items
            .iter()
            .filter_map(|a| match &a.object {
                SlotValue::Phone(p) => Some(p.clone()),
                _ => None,
            })
            .collect();
        observed.sort();
        observed.dedup();
        let mut stored = c.phones.clone();
        stored.sort();
        let ev = evidence_for(&items, ctx);
        raise(log, company, FIELD_PHONES, json!(stored), json!(observed), ev);
    }

    for (company, mut items) in ceos {
        if kb.company(&company).is_none() {
            continue;
        }
        items.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        let Some(person) = person_ref(kb, &items[0].subject) else {
            continue;
        };
        let new = person_json(&person.0, &person.1);
        let old = current_ceo(kb, &company);
        if !old.is_null() && same_person(&old, &new) {
            continue;
        }
        let ev = evidence_for(&items[..1], ctx);
        raise(log, company, FIELD_CEO, old, new, ev);
    }

    for a in key_people {
        let SlotValue::Entity(company) = &a.subject else {
            continue;
        };
        let Some(person) = person_ref(kb, &a.object) else {
            continue;
        };
        if kb.company(company).is_none() || has_personnel(kb, company, &person) {
            continue;
        }
        let mut new = person_json(&person.0, &person.1);
        new["role"] = json!(a.title.clone().unwrap_or_else(|| "key person".into()));
        let ev = evidence_for(&[a], ctx);
        raise(log, company.clone(), FIELD_KEY_PERSON, Value::Null, new, ev);
    }
    created
}

fn bad_value(event: &ChangeEvent, reason: &str) -> FusionError {
    FusionError::BadValue {
        event: event.event_id.clone(),
        reason: reason.to_string(),
    }
}

/// Find or create the person an event names. New persons are created with
/// their affiliation to the event's company.
fn materialize_person(
    kb: &mut KnowledgeBase,
    event: &ChangeEvent,
    role: &str,
    reviewer: &str,
    at: Timestamp,
) -> Result<EntityId, FusionError> {
    let name = event
        .new_value
        .get("full_name")
        .and_then(Value::as_str)
        .ok_or_else(|| bad_value(event, "missing full_name"))?;
    let given = event
        .new_value
        .get("person_id")
        .and_then(Value::as_str)
        .map(EntityId::from);
    let existing = given
        .filter(|id| kb.person(id).is_some())
        .or_else(|| kb.person_by_name(name).map(|p| p.id.clone()));
    let mut person = match existing {
        Some(id) => kb.person(&id).cloned().expect("checked above"),
        None => PersonEntity {
            id: EntityId::default(),
            full_name: name.to_string(),
            affiliations: Vec::new(),
        },
    };
    let affiliation = Affiliation {
        company_id: event.entity_id.clone(),
        role: role.to_string(),
        evidence: Some(event.evidence.provenance.source_url.clone()),
    };
    if !person
        .affiliations
        .iter()
        .any(|a| a.company_id == affiliation.company_id && a.role == affiliation.role)
    {
        person.affiliations.push(affiliation);
    }
    kb.upsert(Entity::Person(person), reviewer, at)
        .map_err(|source| FusionError::Apply {
            event: event.event_id.clone(),
            source,
        })
}

fn apply_to_kb(kb: &mut KnowledgeBase, event: &ChangeEvent, reviewer: &str, at: Timestamp) -> Result<(), FusionError> {
    let apply_err = |source| FusionError::Apply {
        event: event.event_id.clone(),
        source,
    };
    let mut company = kb
        .company(&event.entity_id)
        .cloned()
        .ok_or_else(|| apply_err(KbError::NotFound(event.entity_id.clone())))?;
    match event.field.as_str() {
        FIELD_PHONES => {
            let phones: Vec<String> =
                serde_json::from_value(event.new_value.clone()).map_err(|e| bad_value(event, &e.to_string()))?;
            company.phones = phones;
            // Validate before touching anything.
            kb.validate_company(&company).map_err(apply_err)?;
        }
        FIELD_CEO => {
            let person_id = materialize_person(kb, event, CEO_ROLE, reviewer, at)?;
            company.personnel.retain(|l| l.role != CEO_ROLE);
            company.personnel.push(PersonnelLink {
                person_id,
                role: CEO_ROLE.to_string(),
            });
        }
        FIELD_KEY_PERSON => {
            let role = event
                .new_value
                .get("role")
                .and_then(Value::as_str)
                .unwrap_or("key person")
                .to_string();
            let person_id = materialize_person(kb, event, &role, reviewer, at)?;
            if !company.personnel.iter().any(|l| l.person_id == person_id) {
                company.personnel.push(PersonnelLink { person_id, role });
            }
        }
        other => return Err(bad_value(event, &format!("unknown field `{other}`"))),
    }
    kb.upsert(Entity::Company(company), reviewer, at).map_err(apply_err)?;
    Ok(())
}

/// Record a reviewer decision. Decisions on already decided events are
/// no-ops that return the current state.
pub fn apply_change(
    event_id: &str,
    decision: Decision,
    reviewer: &str,
    kb: &mut KnowledgeBase,
    log: &mut EventLog,
    at: Timestamp,
) -> Result<ChangeEvent, FusionError> {
    let event = log
        .get(event_id)
        .cloned()
        .ok_or_else(|| FusionError::NotFound(event_id.to_string()))?;
    if event.status != EventStatus::Pending {
        return Ok(event);
    }
    if decision == Decision::Accept {
        apply_to_kb(kb, &event, reviewer, at)?;
    }
    let status = match decision {
        Decision::Accept => EventStatus::Accepted,
        Decision::Reject => EventStatus::Rejected,
    };
    kb.record_audit(
        at,
        reviewer,
        match decision {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
        },
        event_id,
        json!({ "entity_id": event.entity_id, "field": event.field }),
    );
    let stored = log.get_mut(event_id).expect("present above");
    stored.status = status;
    stored.decided_by = Some(reviewer.to_string());
    stored.decided_at = Some(at);
    Ok(stored.clone())
}
