//! Knowledge-base domain types.

use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

/// Opaque, stable entity identifier.
///
/// Companies are `co-NNNNN`, persons `pe-NNNNN`; trials derive their id from
/// the source-scoped registry key so that re-harvests address the same row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
#[derive(Default)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(s: impl Into<String>) -> Self {
        EntityId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn trial(source: &str, registry_id: &str) -> Self {
        EntityId(format!("tr-{source}-{registry_id}"))
    }

    /// Which entity kind the id prefix denotes, if any.
    pub fn kind(&self) -> Option<EntityKind> {
        if self.0.starts_with("co-") {
            Some(EntityKind::Company)
        } else if self.0.starts_with("pe-") {
            Some(EntityKind::Person)
        } else if self.0.starts_with("tr-") {
            Some(EntityKind::Trial)
        } else {
            None
        }
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Company,
    Person,
    Trial,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Company => "company",
            EntityKind::Person => "person",
            EntityKind::Trial => "trial",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PersonnelLink {
    pub person_id: EntityId,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanyEntity {
    #[serde(default)]
    pub id: EntityId,
    pub canonical_name: String,
    #[serde(default)]
    pub aliases: BTreeSet<String>,
    pub country: String,
    #[serde(default)]
    pub website: Option<String>,
    #[serde(default)]
    pub personnel: Vec<PersonnelLink>,
    #[serde(default)]
    pub phones: Vec<String>,
    #[serde(default)]
    pub last_harvested: Option<Timestamp>,
    #[serde(default)]
    pub domain_tags: BTreeSet<String>,
}

impl CompanyEntity {
    pub fn new(canonical_name: impl Into<String>, country: impl Into<String>) -> Self {
        CompanyEntity {
            id: EntityId::default(),
            canonical_name: canonical_name.into(),
            aliases: BTreeSet::new(),
            country: country.into(),
            website: None,
            personnel: Vec::new(),
            phones: Vec::new(),
            last_harvested: None,
            domain_tags: BTreeSet::new(),
        }
    }
}


#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Affiliation {
    pub company_id: EntityId,
    pub role: String,
    #[serde(default)]
    pub evidence: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonEntity {
    #[serde(default)]
    pub id: EntityId,
    pub full_name: String,
    #[serde(default)]
    pub affiliations: Vec<Affiliation>,
}

/// Standardized clinical phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "EARLY_PHASE_1")]
    EarlyPhase1,
    #[serde(rename = "PHASE_1")]
    Phase1,
    #[serde(rename = "PHASE_1_2")]
    Phase1To2,
    #[serde(rename = "PHASE_2")]
    Phase2,
    #[serde(rename = "PHASE_2_3")]
    Phase2To3,
    #[serde(rename = "PHASE_3")]
    Phase3,
    #[serde(rename = "PHASE_4")]
    Phase4,
    #[serde(rename = "NOT_APPLICABLE")]
    NotApplicable,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl Phase {
    pub const ALL: [Phase; 9] = [
        Phase::EarlyPhase1,
        Phase::Phase1,
        Phase::Phase1To2,
        Phase::Phase2,
        Phase::Phase2To3,
        Phase::Phase3,
        Phase::Phase4,
        Phase::NotApplicable,
        Phase::Unknown,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::EarlyPhase1 => "EARLY_PHASE_1",
            Phase::Phase1 => "PHASE_1",
            Phase::Phase1To2 => "PHASE_1_2",
            Phase::Phase2 => "PHASE_2",
            Phase::Phase2To3 => "PHASE_2_3",
            Phase::Phase3 => "PHASE_3",
            Phase::Phase4 => "PHASE_4",
            Phase::NotApplicable => "NOT_APPLICABLE",
            Phase::Unknown => "UNKNOWN",
        }
    }

    pub fn from_code(code: &str) -> Option<Phase> {
        Phase::ALL.into_iter().find(|p| p.as_str() == code)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Recruiting,
    Active,
    Completed,
    Terminated,
    Withdrawn,
    Unknown,
}

impl TrialStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrialStatus::Recruiting => "recruiting",
            TrialStatus::Active => "active",
            TrialStatus::Completed => "completed",
            TrialStatus::Terminated => "terminated",
            TrialStatus::Withdrawn => "withdrawn",
            TrialStatus::Unknown => "unknown",
        }
    }

    /// Map a registry's free-text status onto the closed status set.
    pub fn from_registry(raw: &str) -> TrialStatus {
        let key: String = raw
            .trim()
            .to_lowercase()
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { ' ' })
            .collect::<String>()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        match key.as_str() {
            "recruiting" | "not yet recruiting" | "enrolling by invitation" | "authorised"
            | "authorized" | "pending" => TrialStatus::Recruiting,
            "active not recruiting" | "active" | "ongoing" | "restarted" | "suspended"
            | "temporarily halted" => TrialStatus::Active,
            "completed" => TrialStatus::Completed,
            "terminated" | "prematurely ended" => TrialStatus::Terminated,
            "withdrawn" | "not authorised" | "not authorized" => TrialStatus::Withdrawn,
            _ => TrialStatus::Unknown,
        }
    }
}

impl fmt::Display for TrialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_url: String,
    pub fetched_at: Timestamp,
    pub extractor: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalTrialRecord {
    #[serde(default)]
    pub id: EntityId,
    pub registry_id: String,
    pub source: String,
    #[serde(default)]
    pub title: Option<String>,
    pub phase: Phase,
    pub status: TrialStatus,
    #[serde(default)]
    pub sponsors: Vec<String>,
    #[serde(default)]
    pub sponsor_links: Vec<EntityId>,
    #[serde(default)]
    pub conditions: Vec<String>,
    #[serde(default)]
    pub interventions: Vec<String>,
    #[serde(default)]
    pub last_update: Option<NaiveDate>,
    pub provenance: Provenance,
}

impl ClinicalTrialRecord {
    pub fn identity(&self) -> EntityId {
        EntityId::trial(&self.source, &self.registry_id)
    }
}

/// Any record the knowledge base stores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entity {
    Company(CompanyEntity),
    Person(PersonEntity),
    Trial(ClinicalTrialRecord),
}

impl Entity {
    pub fn id(&self) -> &EntityId {
        match self {
            Entity::Company(c) => &c.id,
            Entity::Person(p) => &p.id,
            Entity::Trial(t) => &t.id,
        }
    }

    pub fn kind(&self) -> EntityKind {
        match self {
            Entity::Company(_) => EntityKind::Company,
            Entity::Person(_) => EntityKind::Person,
            Entity::Trial(_) => EntityKind::Trial,
        }
    }
}
