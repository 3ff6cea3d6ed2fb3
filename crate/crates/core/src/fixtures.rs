//! The bundled fixture world: a registry, company websites and a seed KB.
//!
//! Tests and demos use it in-process through [`FixtureFetcher`]; the
//! `fixtures` CLI subcommand serves the same responses over HTTP, routing
//! on the request's host so it works as an HTTP proxy for the `.test`
//! domains.
//!
//! Directory layout under the fixture root:
//!
//! - `kb/companies.jsonl`, `kb/persons.jsonl`: the seed knowledge base;
//! - `registry/records.json`: raw registry records; `records_v2.json`
//!   holds the later state of some of them;
//! - `sites/<host>/...`: website files (`/` is `index.html`, `/team` is
//!   `team.html`); `sites_v2/<host>/...` overlays changed pages;
//! - `gold/`: evaluation tables.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Router;
use serde_json::{json, Value};
use url::Url;

use crate::fetch::{FetchError, FetchResponse, Fetcher};
use crate::kb::KbError;
use crate::store::{Store, COMPANIES_FILE, PERSONS_FILE};

/// Host serving the fixture registry.
pub const REGISTRY_HOST: &str = "registry.fixture.test";

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("fixture file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("fixture file {path} is not valid JSON: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Which state of the world to serve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldVersion {
    /// The initial state.
    V1,
    /// Later state: updated registry records and changed pages.
    V2,
}

#[derive(Debug, Clone)]
pub struct FixtureWorld {
    root: PathBuf,
    version: WorldVersion,
    /// Registry records in `nct_id` order.
    records: Vec<Value>,
}

fn read_json(path: &Path) -> Result<Value, FixtureError> {
    let text = fs::read_to_string(path).map_err(|source| FixtureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FixtureError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn record_id(v: &Value) -> &str {
    v.get("nct_id").and_then(Value::as_str).unwrap_or("")
}

fn contains_ci(haystack: Option<&Value>, needle: &str) -> bool {
    haystack
        .and_then(Value::as_str)
        .is_some_and(|h| h.to_lowercase().contains(needle))
}

/// File backing a site URL path.
fn site_file(path: &str) -> String {
    let trimmed = path.trim_matches('/');
    if trimmed.is_empty() {
        "index.html".to_string()
    } else if trimmed.contains('.') {
        trimmed.to_string()
    } else {
        format!("{trimmed}.html")
    }
}

impl FixtureWorld {
    /// The fixture tree shipped in the crate.
    pub fn bundled_root() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
    }

    pub fn bundled(version: WorldVersion) -> Result<Self, FixtureError> {
        FixtureWorld::load(FixtureWorld::bundled_root(), version)
    }

    pub fn load(root: impl Into<PathBuf>, version: WorldVersion) -> Result<Self, FixtureError> {
        let root = root.into();
        let mut records: Vec<Value> = match read_json(&root.join("registry/records.json"))? {
            Value::Array(items) => items,
            _ => Vec::new(),
        };
        if version == WorldVersion::V2 {
            if let Value::Array(overlay) = read_json(&root.join("registry/records_v2.json"))? {
                for rec in overlay {
                    match records.iter_mut().find(|r| record_id(r) == record_id(&rec)) {
                        Some(slot) => *slot = rec,
                        None => records.push(rec),
                    }
                }
            }
        }
        records.sort_by(|a, b| record_id(a).cmp(record_id(b)));
        Ok(FixtureWorld { root, version, records })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn version(&self) -> WorldVersion {
        self.version
    }

    pub fn records(&self) -> &[Value] {
        &self.records
    }

    pub fn gold_path(&self, name: &str) -> PathBuf {
        self.root.join("gold").join(name)
    }

    /// Copy the seed KB into `dest` and open it as a store.
    pub fn seed_store(&self, dest: &Path) -> Result<Store, KbError> {
        fs::create_dir_all(dest).map_err(|source| KbError::Io {
            path: dest.display().to_string(),
            source,
        })?;
        for name in [COMPANIES_FILE, PERSONS_FILE] {
            let from = self.root.join("kb").join(name);
            fs::copy(&from, dest.join(name)).map_err(|source| KbError::Io {
                path: from.display().to_string(),
                source,
            })?;
        }
        Store::open(dest)
    }

    /// Records matching `term` as a case-insensitive substring of the lead
    /// sponsor or the title.
    pub fn search(&self, term: &str) -> Vec<&Value> {
        let needle = term.to_lowercase();
        self.records
            .iter()
            .filter(|r| contains_ci(r.get("lead_sponsor"), &needle) || contains_ci(r.get("brief_title"), &needle))
            .collect()
    }

    fn registry(&self, url: &Url) -> FetchResponse {
        let path = url.path();
        if path == "/query" {
            let param = |k: &str| url.query_pairs().find(|(n, _)| n == k).map(|(_, v)| v.into_owned());
            let term = param("term").unwrap_or_default();
            let page: usize = param("page").and_then(|p| p.parse().ok()).unwrap_or(1).max(1);
            let size: usize = param("size").and_then(|p| p.parse().ok()).unwrap_or(10).clamp(1, 100);
            let hits = self.search(&term);
            let slice: Vec<&Value> = hits.iter().skip((page - 1) * size).take(size).copied().collect();
            let mut body = json!({ "count": hits.len(), "records": slice });
            if slice.is_empty() {
                body["message"] = json!("No studies found");
            }
            return json_response(url.as_str(), &body);
        }
        if let Some(id) = path.strip_prefix("/study/") {
            return match self.records.iter().find(|r| record_id(r) == id) {
                Some(r) => json_response(url.as_str(), r),
                None => FetchResponse::status(url.as_str(), 404),
            };
        }
        FetchResponse::status(url.as_str(), 404)
    }

    fn site(&self, host: &str, url: &Url) -> Option<FetchResponse> {
        let site_dir = self.root.join("sites").join(host);
        if !site_dir.is_dir() {
            return None;
        }
        let file = site_file(url.path());
        let mut candidates = Vec::new();
        if self.version == WorldVersion::V2 {
            candidates.push(self.root.join("sites_v2").join(host).join(&file));
        }
        candidates.push(site_dir.join(&file));
        let found = candidates.into_iter().find_map(|p| fs::read(p).ok());
        Some(match found {
            Some(body) => FetchResponse {
                url: url.to_string(),
                status: 200,
                body,
                content_type: Some(
                    if file.ends_with(".txt") { "text/plain" } else { "text/html; charset=utf-8" }.to_string(),
                ),
            },
            None => FetchResponse::status(url.as_str(), 404),
        })
    }

    /// Answer a request for `url`. Unknown hosts fail like a DNS error.
    pub fn respond(&self, url: &str) -> Result<FetchResponse, FetchError> {
        let parsed = Url::parse(url).map_err(|e| FetchError::Transport {
            url: url.to_string(),
            reason: e.to_string(),
        })?;
        let host = parsed.host_str().unwrap_or("").to_ascii_lowercase();
        if host == REGISTRY_HOST {
            return Ok(self.registry(&parsed));
        }
        self.site(&host, &parsed).ok_or_else(|| FetchError::Transport {
            url: url.to_string(),
            reason: format!("unknown host `{host}`"),
        })
    }
}

fn json_response(url: &str, body: &Value) -> FetchResponse {
    FetchResponse {
        url: url.to_string(),
        status: 200,
        body: serde_json::to_vec(body).expect("JSON serializes"),
        content_type: Some("application/json".to_string()),
    }
}

/// In-process access to a [`FixtureWorld`].
#[derive(Debug, Clone)]
pub struct FixtureFetcher {
    world: Arc<FixtureWorld>,
}

impl FixtureFetcher {
    pub fn new(world: Arc<FixtureWorld>) -> Self {
        FixtureFetcher { world }
    }

    pub fn world(&self) -> &FixtureWorld {
        &self.world
    }
}

impl Fetcher for FixtureFetcher {
    fn fetch(&self, url: &str) -> Result<FetchResponse, FetchError> {
        self.world.respond(url)
    }
}

async fn proxy_handler(State(world): State<Arc<FixtureWorld>>, req: Request) -> Response {
    let host = req
        .uri()
        .host()
        .map(str::to_string)
        .or_else(|| {
            req.headers()
                .get(header::HOST)
                .and_then(|h| h.to_str().ok())
                .map(|h| h.split(':').next().unwrap_or(h).to_string())
        })
        .unwrap_or_default();
    let path = req.uri().path_and_query().map_or("/", |p| p.as_str());
    let url = format!("http://{host}{path}");
    match world.respond(&url) {
        Ok(resp) => {
            let mut builder = Response::builder().status(resp.status);
            if let Some(ct) = &resp.content_type {
                builder = builder.header(header::CONTENT_TYPE, ct);
            }
            builder
                .body(Body::from(resp.body))
                .unwrap_or_else(|_| StatusCode::INTERNAL_SERVER_ERROR.into_response())
        }
        Err(e) => (StatusCode::BAD_GATEWAY, e.to_string()).into_response(),
    }
}

/// Router answering every path from the world, keyed on the request host.
pub fn fixture_router(world: Arc<FixtureWorld>) -> Router {
    Router::new().fallback(proxy_handler).with_state(world)
}

/// Serve the world until `shutdown` resolves. Returns the bound address
/// through `on_bound` before accepting connections.
pub async fn serve_fixtures(
    world: Arc<FixtureWorld>,
    addr: SocketAddr,
    on_bound: impl FnOnce(SocketAddr),
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    axum::serve(listener, fixture_router(world))
        .with_graceful_shutdown(shutdown)
        .await
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> FixtureWorld {
        FixtureWorld::bundled(WorldVersion::V1).unwrap()
    }

    #[test]
    fn site_paths_map_to_files() {
        assert_eq!(site_file("/"), "index.html");
        assert_eq!(site_file("/about/management"), "about/management.html");
        assert_eq!(site_file("/robots.txt"), "robots.txt");
    }

    #[test]
    fn registry_pages_and_empty_marker() {
        let w = world();
        let resp = w
            .respond("http://registry.fixture.test/query?term=Novagenix&size=10&page=1")
            .unwrap();
        let body: Value = serde_json::from_slice(&resp.body).unwrap();
        let count = body["count"].as_u64().unwrap() as usize;
        assert_eq!(count, w.search("novagenix").len());
        let far = w
            .respond("http://registry.fixture.test/query?term=Novagenix&size=10&page=99")
            .unwrap();
        let body: Value = serde_json::from_slice(&far.body).unwrap();
        assert_eq!(body["message"], "No studies found");
        assert!(body["records"].as_array().unwrap().is_empty());
    }

    #[test]
    fn unknown_host_is_a_transport_error() {
        assert!(matches!(
            world().respond("http://nowhere.test/"),
            Err(FetchError::Transport { .. })
        ));
    }

    #[test]
    fn v2_overlays_records() {
        let v1 = world();
        let v2 = FixtureWorld::bundled(WorldVersion::V2).unwrap();
        assert_eq!(v1.records().len(), v2.records().len());
        assert_ne!(v1.records(), v2.records());
    }
}
