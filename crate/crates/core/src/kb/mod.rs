//! The knowledge-base store: validated upserts, field-predicate queries and
//! the audit trail.
//!
//! Identity keys: trials by `(source, registry_id)`, companies and persons by
//! their internal id only. Names are never identity keys because aliases
//! collide across companies.

pub mod audit;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde_json::{json, Value};

use crate::model::{
    ClinicalTrialRecord, CompanyEntity, Entity, EntityId, EntityKind, PersonEntity,
};
use crate::time::Timestamp;

pub use audit::{AuditEntry, AuditLog};

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("validation failed on `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("unknown field `{field}` for {kind}")]
    UnknownField { field: String, kind: String },
    #[error("malformed filter predicate `{0}` (expected field=value)")]
    BadPredicate(String),
    #[error("entity `{0}` not found")]
    NotFound(EntityId),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("knowledge base path {0} does not exist")]
    MissingPath(String),
    #[error(transparent)]
    Chain(#[from] audit::ChainError),
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> KbError {
    KbError::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

fn e164_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\+[1-9][0-9]{7,14}$").expect("static regex"))
}

/// E.164 syntax: leading `+`, 8 to 15 digits, no leading zero.
pub fn is_e164(s: &str) -> bool {
    e164_re().is_match(s)
}

fn is_country_code(s: &str) -> bool {
    s.len() == 2 && s.bytes().all(|b| b.is_ascii_uppercase())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpsertOutcome {
    Created,
    Replaced,
    Unchanged,
}

impl UpsertOutcome {
    fn as_str(&self) -> &'static str {
        match self {
            UpsertOutcome::Created => "created",
            UpsertOutcome::Replaced => "replaced",
            UpsertOutcome::Unchanged => "unchanged",
        }
    }
}

pub const COMPANY_FIELDS: &[&str] = &[
    "id",
    "canonical_name",
    "aliases",
    "country",
    "website",
    "personnel",
    "phones",
    "last_harvested",
    "domain_tags",
];
pub const PERSON_FIELDS: &[&str] = &["id", "full_name", "affiliations"];
pub const TRIAL_FIELDS: &[&str] = &[
    "id",
    "registry_id",
    "source",
    "title",
    "phase",
    "status",
    "sponsors",
    "sponsor_links",
    "conditions",
    "interventions",
    "last_update",
    "provenance",
];

fn fields_of(kind: EntityKind) -> &'static [&'static str] {
    match kind {
        EntityKind::Company => COMPANY_FIELDS,
        EntityKind::Person => PERSON_FIELDS,
        EntityKind::Trial => TRIAL_FIELDS,
    }
}

/// Conjunction of `field = value` predicates, optionally restricted to one kind.
///
/// A predicate on a list field matches when any element equals the value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Filter {
    pub kind: Option<EntityKind>,
    pub predicates: Vec<(String, String)>,
}

impl Filter {
    pub fn all() -> Self {
        Filter::default()
    }

    pub fn kind(kind: EntityKind) -> Self {
        Filter {
            kind: Some(kind),
            predicates: Vec::new(),
        }
    }

    pub fn with(mut self, field: &str, value: &str) -> Self {
        self.predicates.push((field.to_string(), value.to_string()));
        self
    }

    /// Parse `field=value` strings.
    pub fn parse(kind: Option<EntityKind>, preds: &[&str]) -> Result<Self, KbError> {
        let mut f = Filter {
            kind,
            predicates: Vec::new(),
        };
        for p in preds {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| KbError::BadPredicate(p.to_string()))?;
            f.predicates.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(f)
    }

    fn check_fields(&self) -> Result<(), KbError> {
        for (field, _) in &self.predicates {
            let known = match self.kind {
                Some(k) => fields_of(k).contains(&field.as_str()),
                None => [EntityKind::Company, EntityKind::Person, EntityKind::Trial]
                    .iter()
                    .any(|k| fields_of(*k).contains(&field.as_str())),
            };
            if !known {
                return Err(KbError::UnknownField {
                    field: field.clone(),
                    kind: self.kind.map_or_else(|| "any entity".into(), |k| k.to_string()),
                });
            }
        }
        Ok(())
    }
}

fn value_matches(v: &Value, want: &str) -> bool {
    match v {
        Value::Null => want.is_empty() || want == "null",
        Value::String(s) => s == want,
        Value::Bool(b) => b.to_string() == want,
        Value::Number(n) => n.to_string() == want,
        Value::Array(items) => items.iter().any(|i| value_matches(i, want)),
        Value::Object(map) => map.values().any(|i| value_matches(i, want)),
    }
}

fn entity_matches(entity: &Entity, filter: &Filter) -> bool {
    if filter.kind.is_some_and(|k| k != entity.kind()) {
        return false;
    }
    if filter.predicates.is_empty() {
        return true;
    }
    let value = match entity {
        Entity::Company(c) => serde_json::to_value(c),
        Entity::Person(p) => serde_json::to_value(p),
        Entity::Trial(t) => serde_json::to_value(t),
    }
    .expect("entities serialize");
    filter.predicates.iter().all(|(field, want)| {
        value
            .get(field)
            .is_some_and(|v| value_matches(v, want))
    })
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    companies: BTreeMap<EntityId, CompanyEntity>,
    persons: BTreeMap<EntityId, PersonEntity>,
    trials: BTreeMap<EntityId, ClinicalTrialRecord>,
    audit: AuditLog,
    next_company: u64,
    next_person: u64,
}

fn numeric_suffix(id: &EntityId, prefix: &str) -> Option<u64> {
    id.as_str().strip_prefix(prefix)?.parse().ok()
}

impl KnowledgeBase {
    pub fn new() -> Self {
        KnowledgeBase {
            next_company: 1,
            next_person: 1,
            ..Default::default()
        }
    }

    /// Assemble a KB from previously persisted parts, checking every
    /// invariant including cross-references.
    pub fn from_parts(
        companies: Vec<CompanyEntity>,
        persons: Vec<PersonEntity>,
        trials: Vec<ClinicalTrialRecord>,
        audit: AuditLog,
    ) -> Result<Self, KbError> {
        let mut kb = KnowledgeBase::new();
        kb.audit = audit;
        for c in companies {
            if c.id.is_empty() {
                return Err(invalid("id", "persisted company without id"));
            }
            kb.bump_counters(&c.id);
            kb.companies.insert(c.id.clone(), c);
        }
        for p in persons {
            if p.id.is_empty() {
                return Err(invalid("id", "persisted person without id"));
            }
            kb.bump_counters(&p.id);
            kb.persons.insert(p.id.clone(), p);
        }
        for t in trials {
            let id = t.identity();
            kb.trials.insert(id, ClinicalTrialRecord { id: t.identity(), ..t });
        }
        for c in kb.companies.values() {
            kb.validate_company(c)?;
        }
        for p in kb.persons.values() {
            kb.validate_person(p)?;
        }
        for t in kb.trials.values() {
            kb.validate_trial(t)?;
        }
        Ok(kb)
    }

    fn bump_counters(&mut self, id: &EntityId) {
        if let Some(n) = numeric_suffix(id, "co-") {
            self.next_company = self.next_company.max(n + 1);
        }
        if let Some(n) = numeric_suffix(id, "pe-") {
            self.next_person = self.next_person.max(n + 1);
        }
    }

    pub fn validate_company(&self, c: &CompanyEntity) -> Result<(), KbError> {
        if c.canonical_name.trim().is_empty() {
            return Err(invalid("canonical_name", "must not be empty"));
        }
        if c.aliases.iter().any(|a| a.trim().is_empty()) {
            return Err(invalid("aliases", "must not contain the empty string"));
        }
        if !is_country_code(&c.country) {
            return Err(invalid(
                "country",
                format!("`{}` is not an ISO 3166-1 alpha-2 code", c.country),
            ));
        }
        if let Some(bad) = c.phones.iter().find(|p| !is_e164(p)) {
            return Err(invalid("phones", format!("`{bad}` is not E.164")));
        }
        if let Some(w) = &c.website {
            if url::Url::parse(w).is_err() {
                return Err(invalid("website", format!("`{w}` is not an absolute URL")));
            }
        }
        if let Some(p) = c.personnel.iter().find(|p| !self.persons.contains_key(&p.person_id)) {
            return Err(invalid(
                "personnel",
                format!("unknown person `{}`", p.person_id),
            ));
        }
        Ok(())
    }

    pub fn validate_person(&self, p: &PersonEntity) -> Result<(), KbError> {
        if p.full_name.trim().is_empty() {
            return Err(invalid("full_name", "must not be empty"));
        }
        if let Some(a) = p
            .affiliations
            .iter()
            .find(|a| !self.companies.contains_key(&a.company_id))
        {
            return Err(invalid(
                "affiliations",
                format!("unknown company `{}`", a.company_id),
            ));
        }
        Ok(())
    }

    pub fn validate_trial(&self, t: &ClinicalTrialRecord) -> Result<(), KbError> {
        if t.registry_id.trim().is_empty() {
            return Err(invalid("registry_id", "must not be empty"));
        }
        if t.source.trim().is_empty() {
            return Err(invalid("source", "must not be empty"));
        }
        if let Some(l) = t
            .sponsor_links
            .iter()
            .find(|l| !self.companies.contains_key(l))
        {
            return Err(invalid("sponsor_links", format!("unknown company `{l}`")));
        }
        if t.provenance.source_url.is_empty() {
            return Err(invalid("provenance.source_url", "must not be empty"));
        }
        if t.provenance.extractor.is_empty() {
            return Err(invalid("provenance.extractor", "must not be empty"));
        }
        Ok(())
    }

    pub fn validate(&self, entity: &Entity) -> Result<(), KbError> {
        match entity {
            Entity::Company(c) => self.validate_company(c),
            Entity::Person(p) => self.validate_person(p),
            Entity::Trial(t) => self.validate_trial(t),
        }
    }

    /// Insert or replace an entity, returning its id.
    pub fn upsert(&mut self, entity: Entity, actor: &str, at: Timestamp) -> Result<EntityId, KbError> {
        self.upsert_with_outcome(entity, actor, at).map(|(id, _)| id)
    }

    pub fn upsert_with_outcome(
        &mut self,
        entity: Entity,
        actor: &str,
        at: Timestamp,
    ) -> Result<(EntityId, UpsertOutcome), KbError> {
        self.validate(&entity)?;
        let kind = entity.kind();
        let (id, outcome) = match entity {
            Entity::Company(mut c) => {
                if c.id.is_empty() {
                    c.id = EntityId(format!("co-{:05}", self.next_company));
                } else if c.id.kind() != Some(EntityKind::Company) {
                    return Err(invalid("id", format!("`{}` is not a company id", c.id)));
                }
                self.bump_counters(&c.id);
                let id = c.id.clone();
                let outcome = replace(&mut self.companies, id.clone(), c);
                (id, outcome)
            }
            Entity::Person(mut p) => {
                if p.id.is_empty() {
                    p.id = EntityId(format!("pe-{:05}", self.next_person));
                } else if p.id.kind() != Some(EntityKind::Person) {
                    return Err(invalid("id", format!("`{}` is not a person id", p.id)));
                }
                self.bump_counters(&p.id);
                let id = p.id.clone();
                let outcome = replace(&mut self.persons, id.clone(), p);
                (id, outcome)
            }
            Entity::Trial(mut t) => {
                t.id = t.identity();
                let id = t.id.clone();
                let outcome = replace(&mut self.trials, id.clone(), t);
                (id, outcome)
            }
        };
        self.audit.append(
            at,
            actor,
            "upsert",
            id.as_str(),
            json!({ "kind": kind, "outcome": outcome.as_str() }),
        );
        Ok((id, outcome))
    }

    /// Matching entities in ascending id order.
    pub fn query(&self, filter: &Filter) -> Result<Vec<Entity>, KbError> {
        filter.check_fields()?;
        let mut out: Vec<Entity> = self
            .iter()
            .filter(|e| entity_matches(e, filter))
            .collect();
        out.sort_by(|a, b| a.id().cmp(b.id()));
        Ok(out)
    }

    fn iter(&self) -> impl Iterator<Item = Entity> + '_ {
        self.companies
            .values()
            .cloned()
            .map(Entity::Company)
            .chain(self.persons.values().cloned().map(Entity::Person))
            .chain(self.trials.values().cloned().map(Entity::Trial))
    }

    pub fn get(&self, id: &EntityId) -> Option<Entity> {
        if let Some(c) = self.companies.get(id) {
            return Some(Entity::Company(c.clone()));
        }
        if let Some(p) = self.persons.get(id) {
            return Some(Entity::Person(p.clone()));
        }
        self.trials.get(id).cloned().map(Entity::Trial)
    }

    pub fn company(&self, id: &EntityId) -> Option<&CompanyEntity> {
        self.companies.get(id)
    }

    pub fn person(&self, id: &EntityId) -> Option<&PersonEntity> {
        self.persons.get(id)
    }

    pub fn trial(&self, id: &EntityId) -> Option<&ClinicalTrialRecord> {
        self.trials.get(id)
    }

    pub fn companies(&self) -> impl Iterator<Item = &CompanyEntity> {
        self.companies.values()
    }

    pub fn persons(&self) -> impl Iterator<Item = &PersonEntity> {
        self.persons.values()
    }

    pub fn trials(&self) -> impl Iterator<Item = &ClinicalTrialRecord> {
        self.trials.values()
    }

    pub fn len(&self) -> usize {
        self.companies.len() + self.persons.len() + self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn record_audit(&mut self, at: Timestamp, actor: &str, action: &str, target: &str, detail: Value) {
        self.audit.append(at, actor, action, target, detail);
    }

    /// Every sponsor link, affiliation and personnel link resolves.
    pub fn check_references(&self) -> Result<(), KbError> {
        for c in self.companies.values() {
            self.validate_company(c)?;
        }
        for p in self.persons.values() {
            self.validate_person(p)?;
        }
        for t in self.trials.values() {
            self.validate_trial(t)?;
        }
        Ok(())
    }

    /// A person's first KB name match by exact full name.
    pub fn person_by_name(&self, full_name: &str) -> Option<&PersonEntity> {
        self.persons.values().find(|p| p.full_name == full_name)
    }
}

fn replace<T: PartialEq>(map: &mut BTreeMap<EntityId, T>, id: EntityId, value: T) -> UpsertOutcome {
    match map.get(&id) {
        None => {
            map.insert(id, value);
            UpsertOutcome::Created
        }
        Some(old) if *old == value => UpsertOutcome::Unchanged,
        Some(_) => {
            map.insert(id, value);
            UpsertOutcome::Replaced
        }
    }
}
