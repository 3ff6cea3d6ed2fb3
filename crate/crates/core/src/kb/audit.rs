//! Append-only, hash-chained audit log.
//!
//! Every line carries the SHA-256 of its predecessor so truncation or
//! in-place edits are detectable with [`AuditLog::verify`].

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::time::Timestamp;

/// Hash used as `prev_hash` of the first entry.
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub at: Timestamp,
    pub actor: String,
    pub action: String,
    pub target: String,
    pub detail: Value,
    pub prev_hash: String,
    pub hash: String,
}

#[derive(Serialize)]
struct Hashed<'a> {
    seq: u64,
    at: &'a Timestamp,
    actor: &'a str,
    action: &'a str,
    target: &'a str,
    detail: &'a Value,
    prev_hash: &'a str,
}

fn entry_hash(e: &Hashed<'_>) -> String {
    let bytes = serde_json::to_vec(e).expect("audit entry serializes");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditLog {
    entries: Vec<AuditEntry>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("audit chain broken at seq {seq}: {reason}")]
pub struct ChainError {
    pub seq: u64,
    pub reason: &'static str,
}

impl AuditLog {
    pub fn from_entries(entries: Vec<AuditEntry>) -> Self {
        AuditLog { entries }
    }

    pub fn append(
        &mut self,
        at: Timestamp,
        actor: &str,
        action: &str,
        target: &str,
        detail: Value,
    ) -> &AuditEntry {
        let seq = self.entries.last().map_or(1, |e| e.seq + 1);
        let prev_hash = self
            .entries
            .last()
            .map_or_else(|| GENESIS_HASH.to_string(), |e| e.hash.clone());
        let hash = entry_hash(&Hashed {
            seq,
            at: &at,
            actor,
            action,
            target,
            detail: &detail,
            prev_hash: &prev_hash,
        });
        self.entries.push(AuditEntry {
            seq,
            at,
            actor: actor.to_string(),
            action: action.to_string(),
            target: target.to_string(),
            detail,
            prev_hash,
            hash,
        });
        self.entries.last().expect("just pushed")
    }

    pub fn entries(&self) -> &[AuditEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries with `seq > after`, at most `limit` of them.
    pub fn page(&self, after: u64, limit: usize) -> &[AuditEntry] {
        let start = self.entries.partition_point(|e| e.seq <= after);
        let end = (start + limit).min(self.entries.len());
        &self.entries[start..end]
    }

    pub fn verify(&self) -> Result<(), ChainError> {
        let mut prev = GENESIS_HASH.to_string();
        for (expected_seq, e) in (1..).zip(&self.entries) {
            if e.seq != expected_seq {
                return Err(ChainError { seq: e.seq, reason: "sequence gap" });
            }
            if e.prev_hash != prev {
                return Err(ChainError { seq: e.seq, reason: "prev_hash mismatch" });
            }
            let h = entry_hash(&Hashed {
                seq: e.seq,
                at: &e.at,
                actor: &e.actor,
                action: &e.action,
                target: &e.target,
                detail: &e.detail,
                prev_hash: &e.prev_hash,
            });
            if h != e.hash {
                return Err(ChainError { seq: e.seq, reason: "hash mismatch" });
            }
            prev = e.hash.clone();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn chain_links_and_detects_tampering() {
        let mut log = AuditLog::default();
        let t = Timestamp::from_unix(0);
        log.append(t, "pipeline", "upsert", "co-00001", json!({"outcome": "created"}));
        log.append(t, "alice", "decision", "evt-000001", json!({"decision": "accept"}));
        assert_eq!(log.entries()[1].prev_hash, log.entries()[0].hash);
        assert!(log.verify().is_ok());

        let mut tampered = log.entries().to_vec();
        tampered[0].actor = "mallory".into();
        let err = AuditLog::from_entries(tampered).verify().unwrap_err();
        assert_eq!(err.seq, 1);
    }

    #[test]
    fn page_respects_cursor_and_limit() {
        let mut log = AuditLog::default();
        for i in 0..5 {
            log.append(Timestamp::from_unix(i), "x", "a", "t", Value::Null);
        }
        let p = log.page(2, 2);
        assert_eq!(p.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![3, 4]);
        assert!(log.page(5, 10).is_empty());
    }
}
