//! Knowledge extraction: name variants, gazetteer, entity linking, phase
//! and phone normalization, and role-restricted slot filling.

pub mod fold;
pub mod gazetteer;
pub mod link;
pub mod phase;
pub mod phone;
pub mod slots;
pub mod variants;

pub use gazetteer::{Gazetteer, GazetteerEntry, VariantKind, VariantWeights};
pub use link::{coherence_rerank, link_document, link_mentions, Candidate, LinkedMention, LinkerConfig};
pub use phase::{normalize_phase, PhaseTable};
pub use phone::{find_phone_numbers, normalize_phone, CountryPhoneRule, PhoneError, PhoneRules};
pub use slots::{fill_slots, Document, DocumentKind, Evidence, Role, SlotAssignment, SlotConfig, SlotContext, SlotValue};
pub use variants::{generate_name_variants, NameKind};
