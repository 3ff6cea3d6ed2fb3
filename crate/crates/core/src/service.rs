//! HTTP curation API over the review queue, entities, stats and audit log.
//!
//! All state lives in one [`Store`] behind a read-write lock: reads share
//! it, and each decision holds the write lock while it applies the change
//! and persists it, so a concurrent list sees either the state before or
//! after a decision, never a half-applied one.

use std::collections::BTreeMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::crawl::SnapshotStore;
use crate::fusion::{apply_change, ChangeEvent, Decision, EventStatus, FusionError};
use crate::kb::audit::AuditEntry;
use crate::kb::KbError;
use crate::model::EntityId;
use crate::stats::compute_stats;
use crate::store::Store;
use crate::time::{Clock, SystemClock};

pub const DEFAULT_LIMIT: usize = 50;
pub const MAX_LIMIT: usize = 500;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("cannot open knowledge base: {0}")]
    Store(#[from] KbError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(#[source] std::io::Error),
}

/// Shared handler state.
#[derive(Clone)]
pub struct AppState {
    store: Arc<RwLock<Store>>,
    /// Bearer token to reviewer id.
    tokens: Arc<BTreeMap<String, String>>,
    snapshots: Option<Arc<SnapshotStore>>,
    clock: Arc<dyn Clock>,
    /// Write the store to disk after every decision.
    persist: bool,
}

impl AppState {
    pub fn new(store: Store, tokens: BTreeMap<String, String>) -> Self {
        AppState {
            store: Arc::new(RwLock::new(store)),
            tokens: Arc::new(tokens),
            snapshots: None,
            clock: Arc::new(SystemClock),
            persist: false,
        }
    }

    /// Open the configured store, failing with the path when it is missing.
    pub fn from_config(config: &PipelineConfig) -> Result<Self, ServiceError> {
        let store = Store::open(&config.kb.path)?;
        Ok(AppState::new(store, config.service.tokens.clone())
            .with_snapshots(&config.kb.snapshots)
            .with_persistence(true))
    }

    pub fn with_snapshots(mut self, root: impl Into<PathBuf>) -> Self {
        self.snapshots = Some(Arc::new(SnapshotStore::new(root)));
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_persistence(mut self, persist: bool) -> Self {
        self.persist = persist;
        self
    }

    pub fn store(&self) -> &Arc<RwLock<Store>> {
        &self.store
    }
}

/// Error response with a JSON `{"error": ...}` body.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub pending: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// One page of the review queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewQueueView {
    /// Oldest first.
    pub events: Vec<ChangeEvent>,
    /// Pass back as `cursor` for the next page; absent on the last page.
    pub next_cursor: Option<String>,
    /// Events matching the status filter, across all pages.
    pub total: usize,
    /// Whole-log counts by status.
    pub counts: StatusCounts,
}

#[derive(Debug, Default, Deserialize)]
pub struct ListParams {
    pub status: Option<String>,
    pub cursor: Option<String>,
    pub limit: Option<String>,
}

fn parse_cursor(raw: Option<&str>) -> Result<u64, ApiError> {
    match raw {
        None | Some("") => Ok(0),
        Some(c) => c
            .parse::<u64>()
            .map_err(|_| ApiError::bad_request(format!("bad cursor `{c}`"))),
    }
}

fn parse_limit(raw: Option<&str>) -> Result<usize, ApiError> {
    let Some(raw) = raw.filter(|s| !s.is_empty()) else {
        return Ok(DEFAULT_LIMIT);
    };
    match raw.parse::<usize>() {
        Ok(n) if (1..=MAX_LIMIT).contains(&n) => Ok(n),
        _ => Err(ApiError::bad_request(format!("limit must be 1 to {MAX_LIMIT}, got `{raw}`"))),
    }
}

/// Filter and page the event log. Paging is keyed on event sequence
/// numbers, so appends between requests never shift a page.
pub fn list_changes(
    events: &[ChangeEvent],
    status: Option<EventStatus>,
    cursor: u64,
    limit: usize,
) -> ReviewQueueView {
    let matching: Vec<&ChangeEvent> = events
        .iter()
        .filter(|e| status.is_none_or(|s| e.status == s))
        .collect();
    let after: Vec<&ChangeEvent> = matching.iter().copied().filter(|e| e.seq > cursor).collect();
    let page: Vec<ChangeEvent> = after.iter().take(limit).map(|e| (*e).clone()).collect();
    let next_cursor = (after.len() > limit).then(|| page.last().map(|e| e.seq.to_string())).flatten();
    let count = |s| events.iter().filter(|e| e.status == s).count();
    ReviewQueueView {
        events: page,
        next_cursor,
        total: matching.len(),
        counts: StatusCounts {
            pending: count(EventStatus::Pending),
            accepted: count(EventStatus::Accepted),
            rejected: count(EventStatus::Rejected),
        },
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn changes(
    State(state): State<AppState>,
    Query(params): Query<ListParams>,
) -> Result<Json<ReviewQueueView>, ApiError> {
    let status = match params.status.as_deref().filter(|s| !s.is_empty()) {
        None => None,
        Some(s) => Some(EventStatus::parse(s).ok_or_else(|| ApiError::bad_request(format!("unknown status `{s}`")))?),
    };
    let cursor = parse_cursor(params.cursor.as_deref())?;
    let limit = parse_limit(params.limit.as_deref())?;
    let store = state.store.read();
    Ok(Json(list_changes(store.events.events(), status, cursor, limit)))
}

async fn change(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ChangeEvent>, ApiError> {
    let store = state.store.read();
    store
        .events
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("change event `{id}` not found")))
}

#[derive(Debug, Deserialize)]
struct DecisionBody {
    decision: Decision,
}

fn reviewer(state: &AppState, headers: &HeaderMap) -> Result<String, ApiError> {
    let unauthorized = || ApiError::new(StatusCode::UNAUTHORIZED, "missing or unknown bearer token");
    let value = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .ok_or_else(unauthorized)?;
    let token = value.strip_prefix("Bearer ").ok_or_else(unauthorized)?.trim();
    state.tokens.get(token).cloned().ok_or_else(unauthorized)
}

async fn decide(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<ChangeEvent>, ApiError> {
    let reviewer = reviewer(&state, &headers)?;
    let body: DecisionBody = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("expected {{\"decision\": \"accept\"|\"reject\"}}: {e}")))?;
    let mut guard = state.store.write();
    let store = &mut *guard;
    let at = state.clock.now();
    let event = apply_change(&id, body.decision, &reviewer, &mut store.kb, &mut store.events, at).map_err(|e| match e {
        FusionError::NotFound(_) => ApiError::not_found(e.to_string()),
        FusionError::Apply { .. } | FusionError::BadValue { .. } => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())
        }
    })?;
    if state.persist {
        store.checkpoint().map_err(|e| {
            tracing::error!(error = %e, "checkpoint after decision failed");
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        })?;
    }
    tracing::info!(event = id, reviewer, status = event.status.as_str(), "decision recorded");
    Ok(Json(event))
}

async fn entity(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let store = state.store.read();
    store
        .kb
        .get(&EntityId::from(id.as_str()))
        .map(|e| Json(e).into_response())
        .ok_or_else(|| ApiError::not_found(format!("entity `{id}` not found")))
}

async fn stats(State(state): State<AppState>) -> Response {
    let store = state.store.read();
    Json(compute_stats(&store.kb, state.snapshots.as_deref())).into_response()
}

#[derive(Debug, Default, Deserialize)]
pub struct AuditParams {
    pub cursor: Option<String>,
    pub limit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditView {
    pub entries: Vec<AuditEntry>,
    pub next_cursor: Option<String>,
    pub total: usize,
}

async fn audit(State(state): State<AppState>, Query(params): Query<AuditParams>) -> Result<Json<AuditView>, ApiError> {
    let cursor = parse_cursor(params.cursor.as_deref())?;
    let limit = parse_limit(params.limit.as_deref())?;
    let store = state.store.read();
    let log = store.kb.audit();
    let page = log.page(cursor, limit);
    let last = page.last().map(|e| e.seq);
    let more = last.is_some_and(|s| log.entries().last().is_some_and(|e| e.seq > s));
    Ok(Json(AuditView {
        entries: page.to_vec(),
        next_cursor: more.then(|| last.map(|s| s.to_string())).flatten(),
        total: log.len(),
    }))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/changes", get(changes))
        .route("/changes/:id", get(change))
        .route("/changes/:id/decision", post(decide))
        .route("/entities/:id", get(entity))
        .route("/stats", get(stats))
        .route("/audit", get(audit))
        .with_state(state)
}

/// Bind `addr`, report the bound address, and serve until `shutdown`
/// resolves. In-flight requests complete before this returns.
pub async fn serve(
    state: AppState,
    addr: SocketAddr,
    on_bound: impl FnOnce(SocketAddr),
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind {
        addr: addr.to_string(),
        source,
    })?;
    let bound = listener.local_addr().map_err(ServiceError::Serve)?;
    on_bound(bound);
    tracing::info!(%bound, "curation service listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(ServiceError::Serve)
}
