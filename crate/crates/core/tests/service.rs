//! Curation service over HTTP semantics: routing, auth, paging, decisions.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use trialkb::fusion::{EventEvidence, EventLog, EventStatus};
use trialkb::model::{CompanyEntity, Entity, EntityId, Provenance};
use trialkb::service::{router, AppState, ServiceError};
use trialkb::{FixedClock, KnowledgeBase, Store, Timestamp};

const TOKEN: &str = "secret-token";

fn evidence() -> EventEvidence {
    EventEvidence {
        provenance: Provenance {
            source_url: "http://www.novagenix.test/contact".into(),
            fetched_at: Timestamp::from_unix(0),
            extractor: "test".into(),
        },
        excerpt: "Tel +41 61 555 00 00".into(),
        old_excerpt: None,
    }
}

/// One company and `n` pending phone events, event `i` proposing
/// `+4161555000i`.
fn store(dir: &std::path::Path, n: usize) -> Store {
    let mut kb = KnowledgeBase::new();
    kb.upsert(
        Entity::Company(CompanyEntity::new("Novagenix AG", "CH")),
        "seed",
        Timestamp::from_unix(0),
    )
    .unwrap();
    let mut store = Store::with_kb(dir, kb);
    let mut log = EventLog::new();
    for i in 0..n {
        log.push(
            EntityId::from("co-00001"),
            "phones",
            json!([]),
            json!([format!("+416155500{i:02}")]),
            evidence(),
            Timestamp::from_unix(i as i64),
        );
    }
    store.events = log;
    store.checkpoint().unwrap();
    store
}

fn app(store: Store) -> (AppState, Router) {
    let tokens = BTreeMap::from([(TOKEN.to_string(), "alice".to_string())]);
    let state = AppState::new(store, tokens).with_clock(Arc::new(FixedClock::new(Timestamp::from_unix(1000))));
    (state.clone(), router(state))
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let body = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn decide(app: &Router, id: &str, decision: &str, token: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::post(format!("/changes/{id}/decision")).header("content-type", "application/json");
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    call(app, req.body(Body::from(json!({ "decision": decision }).to_string())).unwrap()).await
}

#[tokio::test]
async fn health_is_ok() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(store(dir.path(), 0));
    let (status, body) = get(&app, "/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn filter_by_status() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(store(dir.path(), 4));
    assert_eq!(decide(&app, "evt-000002", "accept", Some(TOKEN)).await.0, StatusCode::OK);
    let (status, body) = get(&app, "/changes?status=pending").await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = body["events"].as_array().unwrap().iter().map(|e| e["event_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["evt-000001", "evt-000003", "evt-000004"]);
    assert_eq!(body["counts"], json!({ "pending": 3, "accepted": 1, "rejected": 0 }));
    assert_eq!(body["total"], 3);
}

#[tokio::test]
async fn paging_with_cursor() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(store(dir.path(), 3));
    let (_, first) = get(&app, "/changes?status=pending&limit=2").await;
    assert_eq!(first["events"].as_array().unwrap().len(), 2);
    let cursor = first["next_cursor"].as_str().unwrap();
    let (_, second) = get(&app, &format!("/changes?status=pending&limit=2&cursor={cursor}")).await;
    assert_eq!(second["events"].as_array().unwrap().len(), 1);
    assert_eq!(second["events"][0]["event_id"], "evt-000003");
    assert!(second["next_cursor"].is_null());
}

#[tokio::test]
async fn bad_query_parameters_are_400() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(store(dir.path(), 1));
    for uri in [
        "/changes?cursor=abc",
        "/changes?limit=0",
        "/changes?limit=501",
        "/changes?status=maybe",
        "/audit?cursor=-1",
    ] {
        assert_eq!(get(&app, uri).await.0, StatusCode::BAD_REQUEST, "{uri}");
    }
    assert_eq!(get(&app, "/changes?limit=500").await.0, StatusCode::OK);
}

#[tokio::test]
async fn accept_applies_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (state, app) = app(store(dir.path(), 1));
    let (s1, b1) = decide(&app, "evt-000001", "accept", Some(TOKEN)).await;
    assert_eq!(s1, StatusCode::OK);
    assert_eq!(b1["status"], "accepted");
    assert_eq!(b1["decided_by"], "alice");
    let (s2, b2) = decide(&app, "evt-000001", "accept", Some(TOKEN)).await;
    assert_eq!(s2, StatusCode::OK);
    assert_eq!(b1, b2);
    let (_, entity) = get(&app, "/entities/co-00001").await;
    assert_eq!(entity["phones"], json!(["+41615550000"]));
    let audit_accepts = state
        .store()
        .read()
        .kb
        .audit()
        .entries()
        .iter()
        .filter(|e| e.action == "accept" && e.actor == "alice" && e.target == "evt-000001")
        .count();
    assert_eq!(audit_accepts, 1);
}

#[tokio::test]
async fn reject_leaves_kb_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(store(dir.path(), 1));
    let (status, body) = decide(&app, "evt-000001", "reject", Some(TOKEN)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "rejected");
    let (_, entity) = get(&app, "/entities/co-00001").await;
    assert_eq!(entity["phones"], json!([]));
}

#[tokio::test]
async fn auth_is_checked_before_lookup() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(store(dir.path(), 1));
    assert_eq!(decide(&app, "evt-000001", "accept", None).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(decide(&app, "evt-000001", "accept", Some("wrong")).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(decide(&app, "evt-999999", "accept", None).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(decide(&app, "evt-999999", "accept", Some(TOKEN)).await.0, StatusCode::NOT_FOUND);
    let (_, event) = get(&app, "/changes/evt-000001").await;
    assert_eq!(event["status"], "pending");
    assert!(event["decided_by"].is_null());
}

#[tokio::test]
async fn malformed_decision_is_400() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(store(dir.path(), 1));
    assert_eq!(decide(&app, "evt-000001", "maybe", Some(TOKEN)).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn lookups_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(store(dir.path(), 2));
    assert_eq!(get(&app, "/changes/evt-000002").await.1["seq"], 2);
    assert_eq!(get(&app, "/changes/evt-000077").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/entities/co-00099").await.0, StatusCode::NOT_FOUND);
    let (status, stats) = get(&app, "/stats").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stats["distinct_companies"], 1);
    assert_eq!(stats["total_trials"], 0);
}

#[tokio::test]
async fn audit_pages_follow_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(store(dir.path(), 3));
    for id in ["evt-000001", "evt-000002", "evt-000003"] {
        decide(&app, id, "reject", Some(TOKEN)).await;
    }
    let (_, first) = get(&app, "/audit?limit=2").await;
    assert_eq!(first["total"], 4);
    let seqs: Vec<u64> = first["entries"].as_array().unwrap().iter().map(|e| e["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, [1, 2]);
    let cursor = first["next_cursor"].as_str().unwrap();
    let (_, rest) = get(&app, &format!("/audit?cursor={cursor}")).await;
    assert_eq!(rest["entries"].as_array().unwrap().len(), 2);
    assert!(rest["next_cursor"].is_null());
}

#[tokio::test]
async fn decisions_persist_to_disk() {
    let dir = tempfile::tempdir().unwrap();
    let s = store(dir.path(), 1);
    let state = AppState::new(s, BTreeMap::from([(TOKEN.to_string(), "alice".to_string())])).with_persistence(true);
    let app = router(state);
    decide(&app, "evt-000001", "accept", Some(TOKEN)).await;
    let reopened = Store::open(dir.path()).unwrap();
    assert_eq!(reopened.events.get("evt-000001").unwrap().status, EventStatus::Accepted);
    assert_eq!(reopened.kb.company(&"co-00001".into()).unwrap().phones, ["+41615550000"]);
}

/// A list racing an accept sees the event either pending with the old KB
/// value or accepted, never a mixture.
#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_accept_and_list_are_atomic() {
    for _ in 0..20 {
        let dir = tempfile::tempdir().unwrap();
        let (_, app) = app(store(dir.path(), 1));
        let barrier = Arc::new(tokio::sync::Barrier::new(2));
        let (a, b) = (app.clone(), app.clone());
        let (b1, b2) = (barrier.clone(), barrier.clone());
        let accept = tokio::spawn(async move {
            b1.wait().await;
            decide(&a, "evt-000001", "accept", Some(TOKEN)).await
        });
        let list = tokio::spawn(async move {
            b2.wait().await;
            get(&b, "/changes").await
        });
        let (accepted, listed) = (accept.await.unwrap(), list.await.unwrap());
        assert_eq!(accepted.0, StatusCode::OK);
        let status = listed.1["events"][0]["status"].as_str().unwrap().to_string();
        let counts = &listed.1["counts"];
        match status.as_str() {
            "pending" => assert_eq!(counts, &json!({ "pending": 1, "accepted": 0, "rejected": 0 })),
            "accepted" => assert_eq!(counts, &json!({ "pending": 0, "accepted": 1, "rejected": 0 })),
            other => panic!("unexpected status {other}"),
        }
    }
}

#[test]
fn missing_kb_path_is_a_startup_error_naming_it() {
    let mut cfg = trialkb::config::PipelineConfig::default();
    cfg.kb.path = "/definitely/not/here/kb".into();
    let err = AppState::from_config(&cfg).err().expect("startup must fail");
    assert!(matches!(err, ServiceError::Store(_)));
    assert!(err.to_string().contains("/definitely/not/here/kb"), "{err}");
}

#[tokio::test]
async fn serves_over_tcp_and_shuts_down_gracefully() {
    let dir = tempfile::tempdir().unwrap();
    let (state, _) = app(store(dir.path(), 1));
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let (addr_tx, addr_rx) = tokio::sync::oneshot::channel();
    let server = tokio::spawn(trialkb::service::serve(
        state,
        "127.0.0.1:0".parse().unwrap(),
        move |a| {
            let _ = addr_tx.send(a);
        },
        async move {
            let _ = rx.await;
        },
    ));
    let addr = addr_rx.await.unwrap();
    let resp = reqwest::get(format!("http://{addr}/health")).await.unwrap();
    assert_eq!(resp.status(), 200);
    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
}

#[tokio::test]
async fn port_in_use_is_a_bind_error() {
    let held = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = held.local_addr().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (state, _) = app(store(dir.path(), 0));
    let err = trialkb::service::serve(state, addr, |_| {}, async {}).await.unwrap_err();
    assert!(matches!(err, ServiceError::Bind { .. }));
}
