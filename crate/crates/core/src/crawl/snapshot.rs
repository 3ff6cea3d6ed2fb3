//! Page snapshots and their on-disk store.
//!
//! The store keeps one directory per company and, per canonical URL, the
//! current snapshot plus exactly one predecessor.

use std::fs;
use std::path::{Path, PathBuf};

use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::EntityId;
use crate::time::Timestamp;

use super::classify::PageClass;
use super::html::visible_text;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a, 64 bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSnapshot {
    pub url: String,
    pub company_id: EntityId,
    pub fetched_at: Timestamp,
    /// HTTP status; 0 when no response was received.
    pub http_status: u16,
    #[serde(serialize_with = "ser_hash", deserialize_with = "de_hash")]
    pub content_hash: u64,
    #[serde(serialize_with = "ser_body", deserialize_with = "de_body")]
    pub body: Vec<u8>,
    pub page_class: PageClass,
}

fn ser_hash<S: Serializer>(h: &u64, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(&format_args!("{h:016x}"))
}

fn de_hash<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    let s = String::deserialize(d)?;
    u64::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
}

fn ser_body<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(b))
}

fn de_body<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
    let s = String::deserialize(d)?;
    base64::engine::general_purpose::STANDARD
        .decode(s)
        .map_err(serde::de::Error::custom)
}

impl PageSnapshot {
    /// Build a snapshot, hashing and classifying the body.
    pub fn new(url: &str, company_id: &EntityId, fetched_at: Timestamp, http_status: u16, body: Vec<u8>) -> Self {
        let text = std::str::from_utf8(&body).map(visible_text).unwrap_or_default();
        let mut snap = PageSnapshot {
            url: url.to_string(),
            company_id: company_id.clone(),
            fetched_at,
            http_status,
            content_hash: fnv1a64(text.as_bytes()),
            body,
            page_class: PageClass::Other,
        };
        snap.page_class = super::classify::classify_page(&snap);
        snap
    }

    /// Normalized visible text; empty for bodies that are not UTF-8.
    pub fn text(&self) -> String {
        std::str::from_utf8(&self.body).map(visible_text).unwrap_or_default()
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.http_status)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot I/O on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("snapshot {path} is corrupt: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone)]
pub struct SnapshotStore {
    root: PathBuf,
}

impl SnapshotStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        SnapshotStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn company_dir(&self, company: &EntityId) -> PathBuf {
        self.root.join(company.as_str())
    }

    fn paths(&self, company: &EntityId, url: &str) -> (PathBuf, PathBuf) {
        let key = format!("{:016x}", fnv1a64(url.as_bytes()));
        let dir = self.company_dir(company);
        (dir.join(format!("{key}.json")), dir.join(format!("{key}.prev.json")))
    }

    fn read(path: &Path) -> Result<Option<PageSnapshot>, SnapshotError> {
        match fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|source| SnapshotError::Json {
                    path: path.display().to_string(),
                    source,
                }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(SnapshotError::Io {
                path: path.display().to_string(),
                source,
            }),
        }
    }

    /// Store `snap` as current, demoting the old current to previous.
    /// Returns the demoted snapshot.
    pub fn put(&self, snap: &PageSnapshot) -> Result<Option<PageSnapshot>, SnapshotError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| SnapshotError::Io { path, source }
        };
        let dir = self.company_dir(&snap.company_id);
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        let (cur, prev) = self.paths(&snap.company_id, &snap.url);
        let old = Self::read(&cur)?;
        if old.is_some() {
            fs::rename(&cur, &prev).map_err(io(&prev))?;
        }
        let json = serde_json::to_vec_pretty(snap).expect("snapshot serializes");
        fs::write(&cur, json).map_err(io(&cur))?;
        Ok(old)
    }

    pub fn current(&self, company: &EntityId, url: &str) -> Result<Option<PageSnapshot>, SnapshotError> {
        Self::read(&self.paths(company, url).0)
    }

    pub fn previous(&self, company: &EntityId, url: &str) -> Result<Option<PageSnapshot>, SnapshotError> {
        Self::read(&self.paths(company, url).1)
    }

    /// Current snapshots of a company, sorted by URL.
    pub fn current_for(&self, company: &EntityId) -> Result<Vec<PageSnapshot>, SnapshotError> {
        let dir = self.company_dir(company);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => {
                return Err(SnapshotError::Io {
                    path: dir.display().to_string(),
                    source,
                })
            }
        };
        let mut out = Vec::new();
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().to_string();
            if name.ends_with(".json") && !name.ends_with(".prev.json") {
                if let Some(s) = Self::read(&entry.path())? {
                    out.push(s);
                }
            }
        }
        out.sort_by(|a, b| a.url.cmp(&b.url));
        Ok(out)
    }

    /// Number of current snapshots over all companies.
    pub fn count(&self) -> usize {
        let Ok(dirs) = fs::read_dir(&self.root) else {
            return 0;
        };
        dirs.flatten()
            .filter_map(|d| fs::read_dir(d.path()).ok())
            .flat_map(|files| files.flatten())
            .filter(|f| {
                let n = f.file_name().to_string_lossy().to_string();
                n.ends_with(".json") && !n.ends_with(".prev.json")
            })
            .count()
    }
}
