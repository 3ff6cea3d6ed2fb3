//! Clinical-trial and company knowledge acquisition.
//!
//! The crate harvests trial records from registry query interfaces, crawls
//! company websites for leadership and contact information, links the
//! extracted mentions to a company knowledge base and fuses the results,
//! routing contested changes to a human review queue.
//!
//! Module map:
//!
//! - [`model`], [`kb`], [`stats`], [`store`]: domain types, the knowledge
//!   base with its audit log, and persistence.
//! - [`harvest`]: query planning, pagination, empty-page filtering, URL
//!   canonicalization and record parsing for registry adapters.
//! - [`crawl`]: focused crawling, robots rules, page classification and
//!   change detection.
//! - [`extract`]: name variants, gazetteer, entity linking, phase and
//!   phone normalization, slot filling.
//! - [`fusion`]: trial fusion, change proposal and review decisions.
//! - [`service`]: the HTTP curation API.
//! - [`pipeline`], [`config`], [`fixtures`], [`eval`]: orchestration and
//!   the bundled fixture world used by tests and demos.

pub mod config;
pub mod crawl;
pub mod eval;
pub mod extract;
pub mod fetch;
pub mod fixtures;
pub mod fusion;
pub mod harvest;
pub mod kb;
pub mod model;
pub mod pipeline;
pub mod service;

pub mod stats;
pub mod store;
pub mod time;

pub use kb::{KbError, KnowledgeBase};
pub use model::{
    ClinicalTrialRecord, CompanyEntity, Entity, EntityId, EntityKind, PersonEntity, Phase,
    Provenance, TrialStatus,
};

pub use stats::{compute_stats, StatsReport};
pub use store::Store;
pub use time::{Clock, FixedClock, SystemClock, Timestamp};

/// Extractor/component version stamped into provenance records.
pub const COMPONENT_VERSION: &str = env!("CARGO_PKG_VERSION");
