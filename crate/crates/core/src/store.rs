//! On-disk persistence of the KB, the change-event log and the quarantine.
//!
//! Layout of a store directory:
//!
//! - `companies.jsonl`, `persons.jsonl`, `trials.jsonl`: one entity per
//!   line in id order, fully rewritten on checkpoint;
//! - `audit.jsonl`: the hash-chained audit log, append-only;
//! - `events.jsonl`: change events in sequence order;
//! - `quarantine.jsonl`: records rejected by validation, with the reason.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::fusion::{ChangeEvent, EventLog};
use crate::kb::{AuditEntry, AuditLog, KbError, KnowledgeBase};
use crate::time::Timestamp;

pub const COMPANIES_FILE: &str = "companies.jsonl";
pub const PERSONS_FILE: &str = "persons.jsonl";
pub const TRIALS_FILE: &str = "trials.jsonl";
pub const AUDIT_FILE: &str = "audit.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const QUARANTINE_FILE: &str = "quarantine.jsonl";

/// A record that failed validation, kept for replay after a fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantineEntry {
    pub at: Timestamp,
    pub source: String,
    pub reason: String,
    pub record: Value,
}

#[derive(Debug, Default)]
pub struct Store {
    root: PathBuf,
    pub kb: KnowledgeBase,
    pub events: EventLog,
    pub quarantine: Vec<QuarantineEntry>,
    /// Audit entries already on disk.
    persisted_audit: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> KbError {
    KbError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, KbError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path, e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| KbError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

/// Replace `path` atomically with one JSON line per item.
fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<(), KbError> {
    let tmp = path.with_extension("jsonl.tmp");
    let file = File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| KbError::Json {
            path: tmp.display().to_string(),
            line: 0,
            source,
        })?;
        w.write_all(b"\n").map_err(|e| io_err(&tmp, e))?;
    }
    w.flush().map_err(|e| io_err(&tmp, e))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

impl Store {
    /// Open an existing store directory. Fails naming the path when the
    /// directory is missing.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, KbError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(KbError::MissingPath(root.display().to_string()));
        }
        let audit = AuditLog::from_entries(read_jsonl::<AuditEntry>(&root.join(AUDIT_FILE))?);
        audit.verify()?;
        let persisted_audit = audit.len();
        let kb = KnowledgeBase::from_parts(
            read_jsonl(&root.join(COMPANIES_FILE))?,
            read_jsonl(&root.join(PERSONS_FILE))?,
            read_jsonl(&root.join(TRIALS_FILE))?,
            audit,
        )?;
        let events = EventLog::from_events(read_jsonl::<ChangeEvent>(&root.join(EVENTS_FILE))?);
        let quarantine = read_jsonl(&root.join(QUARANTINE_FILE))?;
        Ok(Store {
            root,
            kb,
            events,
            quarantine,
            persisted_audit,
        })
    }

    /// Open the store, creating an empty one when the directory is missing.
    pub fn open_or_create(root: impl Into<PathBuf>) -> Result<Self, KbError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        Store::open(root)
    }

    /// A store around an in-memory KB, not yet written anywhere.
    pub fn with_kb(root: impl Into<PathBuf>, kb: KnowledgeBase) -> Self {
        Store {
            root: root.into(),
            kb,
            ..Default::default()
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn quarantine_record(&mut self, at: Timestamp, source: &str, reason: &str, record: Value) {
        self.quarantine.push(QuarantineEntry {
            at,
            source: source.to_string(),
            reason: reason.to_string(),
            record,
        });
    }

    /// Rewrite entity, event and quarantine files; append new audit lines.
    pub fn checkpoint(&mut self) -> Result<(), KbError> {
        fs::create_dir_all(&self.root).map_err(|e| io_err(&self.root, e))?;
        write_jsonl(&self.root.join(COMPANIES_FILE), self.kb.companies())?;
        write_jsonl(&self.root.join(PERSONS_FILE), self.kb.persons())?;
        write_jsonl(&self.root.join(TRIALS_FILE), self.kb.trials())?;
        write_jsonl(&self.root.join(EVENTS_FILE), self.events.events())?;
        write_jsonl(&self.root.join(QUARANTINE_FILE), &self.quarantine)?;

        let path = self.root.join(AUDIT_FILE);
        let fresh = &self.kb.audit().entries()[self.persisted_audit.min(self.kb.audit().len())..];
        if !fresh.is_empty() || !path.exists() {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| io_err(&path, e))?;
            let mut w = BufWriter::new(file);
            for e in fresh {
                serde_json::to_writer(&mut w, e).map_err(|source| KbError::Json {
                    path: path.display().to_string(),
                    line: 0,
                    source,
                })?;
                w.write_all(b"\n").map_err(|e| io_err(&path, e))?;
            }
            w.flush().map_err(|e| io_err(&path, e))?;
        }
        self.persisted_audit = self.kb.audit().len();
        Ok(())
    }
}
