//! Registry adapter configuration and result-page parsing.
//!
//! Everything registry-specific (URL template, pagination, empty-result
//! markers, record field paths) is data, loaded from an adapter file.

use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

const BUNDLED: &str = include_str!("../../data/adapters.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pagination {
    /// Query parameter carrying the page number.
    pub page_param: String,
    pub page_size: u32,
    #[serde(default = "default_first_page")]
    pub first_page: u32,
    /// Hard stop for registries that never signal the end.
    #[serde(default = "default_max_pages")]
    pub max_pages: u32,
}

fn default_first_page() -> u32 {
    1
}

fn default_max_pages() -> u32 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordParserSpec {
    /// Dot path to the array of records in a page body.
    pub records_field: String,
    /// Dot path to the declared total hit count, if the registry reports one.
    #[serde(default)]
    pub count_field: Option<String>,
    /// Record field name to dot path inside one record. Recognized names:
    /// `registry_id` (required), `title`, `phase`, `status`, `lead_sponsor`,
    /// `collaborators`, `conditions`, `interventions`, `last_update`.
    pub fields: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceAdapter {
    pub adapter_id: String,
    #[serde(default = "default_enabled")]
    pub enabled: bool,
    #[serde(default)]
    pub description: Option<String>,
    /// Placeholders: `{term}` (URL-encoded) and `{page_size}`.
    pub query_url_template: String,
    /// Per-record landing page, placeholder `{registry_id}`; used as the
    /// provenance URL of parsed records.
    #[serde(default)]
    pub record_url_template: Option<String>,
    pub pagination: Pagination,
    /// Regular expressions that mark an empty result body.
    #[serde(default)]
    pub empty_markers: Vec<String>,
    pub parser: RecordParserSpec,
}

fn default_enabled() -> bool {
    true
}

#[derive(Debug, thiserror::Error)]
pub enum AdapterError {
    #[error("adapter file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("adapter config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("adapter `{adapter}`: {reason}")]
    Invalid { adapter: String, reason: String },
}

impl SourceAdapter {
    pub fn validate(&self) -> Result<(), AdapterError> {
        let bad = |reason: String| AdapterError::Invalid {
            adapter: self.adapter_id.clone(),
            reason,
        };
        if self.adapter_id.trim().is_empty() {
            return Err(bad("adapter_id must not be empty".into()));
        }
        if self.pagination.page_size == 0 {
            return Err(bad("page_size must be at least 1".into()));
        }
        if self.pagination.max_pages == 0 {
            return Err(bad("max_pages must be at least 1".into()));
        }
        if !self.query_url_template.contains("{term}") {
            return Err(bad("query_url_template lacks {term}".into()));
        }
        if !self.parser.fields.contains_key("registry_id") {
            return Err(bad("parser.fields lacks registry_id".into()));
        }
        for m in &self.empty_markers {
            Regex::new(m).map_err(|e| bad(format!("empty marker `{m}`: {e}")))?;
        }
        Ok(())
    }

    /// Whether records carry a last-update date usable for incremental sync.
    pub fn supports_incremental(&self) -> bool {
        self.parser.fields.contains_key("last_update")
    }

    /// Query URL for `term` and `page`, before canonicalization.
    pub fn page_url(&self, term: &str, page: u32) -> Result<String, url::ParseError> {
        let encoded: String = url::form_urlencoded::byte_serialize(term.as_bytes()).collect();
        let filled = self
            .query_url_template
            .replace("{term}", &encoded)
            .replace("{page_size}", &self.pagination.page_size.to_string());
        let mut url = url::Url::parse(&filled)?;
        url.query_pairs_mut()
            .append_pair(&self.pagination.page_param, &page.to_string());
        Ok(url.to_string())
    }

    pub fn record_url(&self, registry_id: &str) -> Option<String> {
        self.record_url_template
            .as_ref()
            .map(|t| t.replace("{registry_id}", registry_id))
    }

    fn markers(&self) -> Vec<Regex> {
        self.empty_markers
            .iter()
            .filter_map(|m| Regex::new(m).ok())
            .collect()
    }

    pub fn body_has_empty_marker(&self, body: &[u8]) -> bool {
        let text = String::from_utf8_lossy(body);
        self.markers().iter().any(|re| re.is_match(&text))
    }
}

/// Adapters keyed by id.
#[derive(Debug, Clone, Default)]
pub struct AdapterRegistry {
    adapters: BTreeMap<String, SourceAdapter>,
}

impl AdapterRegistry {
    pub fn from_json(json: &str) -> Result<Self, AdapterError> {
        let list: Vec<SourceAdapter> = serde_json::from_str(json)?;
        let mut adapters = BTreeMap::new();
        for a in list {
            a.validate()?;
            if adapters.contains_key(&a.adapter_id) {
                return Err(AdapterError::Invalid {
                    adapter: a.adapter_id,
                    reason: "duplicate adapter_id".into(),
                });
            }
            adapters.insert(a.adapter_id.clone(), a);
        }
        Ok(AdapterRegistry { adapters })
    }

    pub fn load(path: &Path) -> Result<Self, AdapterError> {
        let text = std::fs::read_to_string(path).map_err(|source| AdapterError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The adapter set shipped with the crate: the fixture registry plus
    /// disabled templates for the public registries.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled adapters are valid")
    }

    pub fn get(&self, id: &str) -> Option<&SourceAdapter> {
        self.adapters.get(id)
    }

    pub fn enabled(&self) -> impl Iterator<Item = &SourceAdapter> {
        self.adapters.values().filter(|a| a.enabled)
    }

    pub fn all(&self) -> impl Iterator<Item = &SourceAdapter> {
        self.adapters.values()
    }

    pub fn insert(&mut self, adapter: SourceAdapter) -> Result<(), AdapterError> {
        adapter.validate()?;
        self.adapters.insert(adapter.adapter_id.clone(), adapter);
        Ok(())
    }
}

/// Resolve a dot path (`a.b.c`) inside a JSON value.
pub fn lookup_path<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.')
        .filter(|s| !s.is_empty())
        .try_fold(value, |v, key| v.get(key))
}

/// One fetched result page.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultPage {
    pub url: String,
    pub raw_body: Vec<u8>,
    pub declared_count: Option<u64>,
    pub records: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PageError {
    #[error("page body is not JSON: {0}")]
    NotJson(String),
    #[error("records field `{0}` missing or not a list")]
    MissingRecords(String),
    #[error("{records} records exceed declared count {declared}")]
    CountMismatch { records: usize, declared: u64 },
}

/// Parse a page body according to the adapter's parser configuration.
///
/// A body that is not JSON or lacks the records list is accepted as an
/// empty page when an empty-result marker matches it.
pub fn parse_page(url: &str, body: &[u8], adapter: &SourceAdapter) -> Result<ResultPage, PageError> {
    let empty = |declared_count| ResultPage {
        url: url.to_string(),
        raw_body: body.to_vec(),
        declared_count,
        records: Vec::new(),
    };
    let json: Value = match serde_json::from_slice(body) {
        Ok(v) => v,
        Err(e) => {
            if adapter.body_has_empty_marker(body) {
                return Ok(empty(None));
            }
            return Err(PageError::NotJson(e.to_string()));
        }
    };
    let declared_count = adapter
        .parser
        .count_field
        .as_deref()
        .and_then(|p| lookup_path(&json, p))
        .and_then(Value::as_u64);
    let records = match lookup_path(&json, &adapter.parser.records_field) {
        Some(Value::Array(items)) => items.clone(),
        Some(Value::Null) | None
            if declared_count == Some(0) || adapter.body_has_empty_marker(body) =>
        {
            Vec::new()
        }
        _ => return Err(PageError::MissingRecords(adapter.parser.records_field.clone())),
    };
    if let Some(declared) = declared_count {
        if records.len() as u64 > declared {
            return Err(PageError::CountMismatch {
                records: records.len(),
                declared,
            });
        }
    }
    Ok(ResultPage {
        url: url.to_string(),
        raw_body: body.to_vec(),
        declared_count,
        records,
    })
}

/// True iff the registry declared zero hits, returned no records, or the
/// body carries one of the adapter's empty-result markers.
pub fn is_empty_result(page: &ResultPage, adapter: &SourceAdapter) -> bool {
    page.declared_count == Some(0)
        || page.records.is_empty()
        || adapter.body_has_empty_marker(&page.raw_body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> SourceAdapter {
        AdapterRegistry::bundled().get("fixture").unwrap().clone()
    }

    #[test]
    fn bundled_adapters_load() {
        let reg = AdapterRegistry::bundled();
        assert!(reg.get("fixture").unwrap().enabled);
        assert!(reg.get("fixture-nocount").unwrap().parser.count_field.is_none());
        for live in ["ctgov", "euctr", "who-ictrp"] {
            assert!(!reg.get(live).unwrap().enabled, "{live} must ship disabled");
        }
    }

    #[test]
    fn page_url_encodes_term() {
        let url = fixture().page_url("Apex Biosciences & Co", 2).unwrap();
        assert!(url.contains("term=Apex+Biosciences+%26+Co"), "{url}");
        assert!(url.ends_with("page=2"), "{url}");
    }

    #[test]
    fn empty_result_rules() {
        let a = fixture();
        let p = parse_page("u", br#"{"count":0,"records":[]}"#, &a).unwrap();
        assert!(is_empty_result(&p, &a));
        let p = parse_page("u", br#"{"count":5,"records":[],"message":"No studies found"}"#, &a).unwrap();
        assert!(is_empty_result(&p, &a));
        let recs: Vec<Value> = (0..10).map(|i| serde_json::json!({"nct_id": format!("N{i}")})).collect();
        let body = serde_json::to_vec(&serde_json::json!({"count": 25, "records": recs})).unwrap();
        let p = parse_page("u", &body, &a).unwrap();
        assert!(!is_empty_result(&p, &a));
        assert_eq!(p.declared_count, Some(25));
    }

    #[test]
    fn marker_only_body_is_empty_page() {
        let a = fixture();
        let p = parse_page("u", b"<html>No studies found</html>", &a).unwrap();
        assert!(is_empty_result(&p, &a));
        assert!(parse_page("u", b"<html>oops</html>", &a).is_err());
    }

    #[test]
    fn records_exceeding_declared_count_are_malformed() {
        let a = fixture();
        let body = br#"{"count":1,"records":[{"nct_id":"A"},{"nct_id":"B"}]}"#;
        assert!(matches!(
            parse_page("u", body, &a),
            Err(PageError::CountMismatch { .. })
        ));
    }

    #[test]
    fn validation() {
        let mut a = fixture();
        a.pagination.page_size = 0;
        assert!(a.validate().is_err());
        let mut a = fixture();
        a.empty_markers.push("(".into());
        assert!(a.validate().is_err());
    }

    #[test]
    fn dot_paths() {
        let v = serde_json::json!({"a": {"b": [1, 2]}});
        assert_eq!(lookup_path(&v, "a.b").unwrap().as_array().unwrap().len(), 2);
        assert!(lookup_path(&v, "a.c").is_none());
    }
}
