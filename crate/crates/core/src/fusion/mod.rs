//! Fusion of extracted facts into the knowledge base.
//!
//! Each slot role has a merge policy. Auto roles are applied directly with
//! an audit entry; curated roles become change events that a reviewer must
//! accept before the KB changes.

pub mod events;
pub mod propose;
pub mod trial;

use serde::{Deserialize, Serialize};

use crate::extract::slots::Role;

pub use events::{ChangeEvent, Decision, EventEvidence, EventLog, EventStatus, FIELD_CEO, FIELD_KEY_PERSON, FIELD_PHONES};
pub use propose::{apply_change, propose_changes, FusionError, ProposalContext, CEO_ROLE};
pub use trial::{changed_fields, fuse_trial, match_trial, FusionOutcome, FusionSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Applied without review.
    Auto,
    /// Routed to the review queue.
    Curated,
}

/// Merge policy per slot role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergePolicy {
    pub clinical_phase_of: Policy,
    pub performed_by: Policy,
    pub is_phone_number_of: Policy,
    pub chief_executive_officer_of: Policy,
    pub has_key_person: Policy,
}

impl Default for MergePolicy {
    fn default() -> Self {
        MergePolicy {
            clinical_phase_of: Policy::Auto,
            performed_by: Policy::Auto,
            is_phone_number_of: Policy::Curated,
            chief_executive_officer_of: Policy::Curated,
            has_key_person: Policy::Curated,
        }
    }
}

impl MergePolicy {
    pub fn policy_for(&self, role: Role) -> Policy {
        match role {
            Role::ClinicalPhaseOf => self.clinical_phase_of,
            Role::PerformedBy => self.performed_by,
            Role::IsPhoneNumberOf => self.is_phone_number_of,
            Role::ChiefExecutiveOfficerOf => self.chief_executive_officer_of,
            Role::HasKeyPerson => self.has_key_person,
        }
    }
}
