//! Mapping of registry phase vocabularies onto [`Phase`].
//!
//! Lookup is table-driven. Keys are folded, punctuation becomes whitespace
//! and runs of whitespace collapse, so `"Phase 1/2"`, `"phase 1-2"` and
//! `"PHASE 1, 2"` share one row.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::model::Phase;

use super::fold::fold;

const BUNDLED: &str = include_str!("../../data/phase_map.json");

#[derive(Debug, Deserialize)]
struct Row {
    raw: String,
    phase: Phase,
}

#[derive(Debug, thiserror::Error)]
pub enum PhaseTableError {
    #[error("phase table is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row `{raw}` maps to UNKNOWN; leave unmapped strings out of the table")]
    UnknownRow { raw: String },
    #[error("rows `{first}` and `{second}` normalize to the same key with different phases")]
    Conflict { first: String, second: String },
}

/// Case- and punctuation-insensitive key.
pub fn phase_key(raw: &str) -> String {
    fold(raw)
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone)]
pub struct PhaseTable {
    map: HashMap<String, (Phase, String)>,
}

impl PhaseTable {
    pub fn from_json(json: &str) -> Result<Self, PhaseTableError> {
        let rows: Vec<Row> = serde_json::from_str(json)?;
        let mut map: HashMap<String, (Phase, String)> = HashMap::new();
        for row in rows {
            if row.phase == Phase::Unknown {
                return Err(PhaseTableError::UnknownRow { raw: row.raw });
            }
            let key = phase_key(&row.raw);
            if let Some((existing, first)) = map.get(&key) {
                if *existing != row.phase {
                    return Err(PhaseTableError::Conflict {
                        first: first.clone(),
                        second: row.raw,
                    });
                }
                continue;
            }
            map.insert(key, (row.phase, row.raw));
        }
        Ok(PhaseTable { map })
    }

    /// The table shipped with the crate.
    pub fn bundled() -> &'static PhaseTable {
        static TABLE: OnceLock<PhaseTable> = OnceLock::new();
        TABLE.get_or_init(|| PhaseTable::from_json(BUNDLED).expect("bundled phase table is valid"))
    }

    /// Exact table hit, without the UNKNOWN fallback.
    pub fn lookup(&self, raw: &str) -> Option<Phase> {
        self.map.get(&phase_key(raw)).map(|(p, _)| *p)
    }

    /// Total: unmapped input yields [`Phase::Unknown`] and is logged so the
    /// table can grow.
    pub fn normalize(&self, raw: &str) -> Phase {
        match self.lookup(raw) {
            Some(p) => p,
            None => {
                if !raw.trim().is_empty() {
                    tracing::warn!(raw, "unmapped clinical phase");
                }
                Phase::Unknown
            }
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Normalize against the bundled table.
pub fn normalize_phase(raw: &str) -> Phase {
    PhaseTable::bundled().normalize(raw)
}
