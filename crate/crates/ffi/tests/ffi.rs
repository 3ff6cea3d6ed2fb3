//! The C ABI exercised through its exported symbols.

use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use trialkb::config::PipelineConfig;
use trialkb::fixtures::{FixtureFetcher, FixtureWorld, WorldVersion};
use trialkb::fusion::EventStatus;
use trialkb::{compute_stats, pipeline, FixedClock, Store, Timestamp};
use trialkb_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

/// Take ownership of a returned string.
unsafe fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    tkb_string_free(p);
    s
}

fn last_error() -> Option<String> {
    let p = tkb_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

/// A fixture KB with crawled pages and pending change events.
fn crawled_kb(dir: &Path) {
    let world = std::sync::Arc::new(FixtureWorld::bundled(WorldVersion::V1).unwrap());
    let mut store = world.seed_store(&dir.join("kb")).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.kb.snapshots = dir.join("snapshots");
    let fetcher = FixtureFetcher::new(world);
    pipeline::crawl(&mut store, &fetcher, &FixedClock::new(Timestamp::from_unix(0)), &cfg, None).unwrap();
    store.checkpoint().unwrap();
}

unsafe fn open(dir: &Path) -> *mut TkbStore {
    let mut store = ptr::null_mut();
    let kb = c(dir.join("kb").to_str().unwrap());
    let snaps = c(dir.join("snapshots").to_str().unwrap());
    assert_eq!(tkb_store_open(kb.as_ptr(), snaps.as_ptr(), &mut store), TkbStatus::Ok);
    store
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(tkb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported_and_cleared_by_success() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(tkb_normalize_phase(ptr::null(), &mut out), TkbStatus::NullArgument);
        assert!(last_error().unwrap().contains("raw"));
        assert_eq!(tkb_normalize_phase(c("Phase 2").as_ptr(), ptr::null_mut()), TkbStatus::NullArgument);
        assert_eq!(tkb_store_stats_json(ptr::null(), &mut out), TkbStatus::NullArgument);
        assert_eq!(tkb_normalize_phase(c("Phase 2").as_ptr(), &mut out), TkbStatus::Ok);
        assert_eq!(take(out), "PHASE_2");
        assert!(last_error().is_none());
        tkb_store_free(ptr::null_mut());
        tkb_gazetteer_free(ptr::null_mut());
        tkb_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8_is_rejected() {
    let bytes = CString::new(vec![0xffu8, 0xfe]).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { tkb_canonicalize_url(bytes.as_ptr(), &mut out) }, TkbStatus::InvalidUtf8);
}

#[test]
fn missing_store_is_an_io_error_naming_the_path() {
    let mut store = ptr::null_mut();
    let path = c("/no/such/kb");
    assert_eq!(unsafe { tkb_store_open(path.as_ptr(), ptr::null(), &mut store) }, TkbStatus::Io);
    assert!(store.is_null());
    assert!(last_error().unwrap().contains("/no/such/kb"));
}

#[test]
fn normalizers() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(tkb_normalize_phone(c("030 1234567").as_ptr(), c("DE").as_ptr(), &mut out), TkbStatus::Ok);
        assert_eq!(take(out), "+49301234567");
        assert_eq!(tkb_normalize_phone(c("12").as_ptr(), c("DE").as_ptr(), &mut out), TkbStatus::Parse);
        assert!(last_error().is_some());
        assert_eq!(tkb_normalize_phase(c("no idea").as_ptr(), &mut out), TkbStatus::Ok);
        assert_eq!(take(out), "UNKNOWN");
        assert_eq!(tkb_canonicalize_url(c("HTTP://Example.TEST:80/a/../b").as_ptr(), &mut out), TkbStatus::Ok);
        assert_eq!(take(out), trialkb::harvest::canonicalize_url("HTTP://Example.TEST:80/a/../b").unwrap());
        assert_eq!(tkb_canonicalize_url(c("not a url").as_ptr(), &mut out), TkbStatus::Parse);
    }
}

#[test]
fn stats_and_entities() {
    let dir = tempfile::tempdir().unwrap();
    crawled_kb(dir.path());
    unsafe {
        let store = open(dir.path());
        let mut out = ptr::null_mut();
        assert_eq!(tkb_store_stats_json(store, &mut out), TkbStatus::Ok);
        let got: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        let rust = Store::open(dir.path().join("kb")).unwrap();
        let snaps = trialkb::crawl::SnapshotStore::new(dir.path().join("snapshots"));
        assert_eq!(got, serde_json::to_value(compute_stats(&rust.kb, Some(&snaps))).unwrap());
        assert!(got["crawled_pages"].as_u64().unwrap() > 0);

        assert_eq!(tkb_store_entity_json(store, c("co-00001").as_ptr(), &mut out), TkbStatus::Ok);
        let company: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(company["id"], "co-00001");
        assert_eq!(tkb_store_entity_json(store, c("co-99999").as_ptr(), &mut out), TkbStatus::NotFound);
        tkb_store_free(store);
    }
}

#[test]
fn review_queue_paging_and_decisions() {
    let dir = tempfile::tempdir().unwrap();
    crawled_kb(dir.path());
    unsafe {
        let store = open(dir.path());
        let mut out = ptr::null_mut();
        let pending = c("pending");

        // Walk every page of the pending queue.
        let mut ids = vec![];
        let mut cursor = 0u64;
        loop {
            assert_eq!(tkb_store_list_changes_json(store, pending.as_ptr(), cursor, 7, &mut out), TkbStatus::Ok);
            let page: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
            ids.extend(page["events"].as_array().unwrap().iter().map(|e| e["event_id"].as_str().unwrap().to_string()));
            match page["next_cursor"].as_str() {
                Some(next) => cursor = next.parse().unwrap(),
                None => break,
            }
        }
        let total = Store::open(dir.path().join("kb")).unwrap().events.count(EventStatus::Pending);
        assert!(total > 7);
        assert_eq!(ids.len(), total);

        assert_eq!(tkb_store_list_changes_json(store, c("maybe").as_ptr(), 0, 10, &mut out), TkbStatus::Parse);
        assert_eq!(tkb_store_list_changes_json(store, ptr::null(), 0, 0, &mut out), TkbStatus::Validation);
        assert_eq!(tkb_store_list_changes_json(store, ptr::null(), 0, 501, &mut out), TkbStatus::Validation);

        let reviewer = c("reviewer-ffi");
        let first = c(&ids[0]);
        assert_eq!(tkb_store_decide(store, first.as_ptr(), true, reviewer.as_ptr(), &mut out), TkbStatus::Ok);
        let event: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(event["status"], "accepted");
        // A second, contrary decision is a no-op.
        assert_eq!(tkb_store_decide(store, first.as_ptr(), false, reviewer.as_ptr(), ptr::null_mut()), TkbStatus::Ok);
        let second = c(&ids[1]);
        assert_eq!(tkb_store_decide(store, second.as_ptr(), false, reviewer.as_ptr(), ptr::null_mut()), TkbStatus::Ok);
        assert_eq!(tkb_store_decide(store, c("ev-missing").as_ptr(), true, reviewer.as_ptr(), ptr::null_mut()), TkbStatus::NotFound);
        assert_eq!(tkb_store_decide(store, second.as_ptr(), true, c(" ").as_ptr(), ptr::null_mut()), TkbStatus::Validation);
        tkb_store_free(store);

        // Decisions were persisted.
        let reopened = Store::open(dir.path().join("kb")).unwrap();
        assert_eq!(reopened.events.get(&ids[0]).unwrap().status, EventStatus::Accepted);
        assert_eq!(reopened.events.get(&ids[1]).unwrap().status, EventStatus::Rejected);
    }
}

#[test]
fn gazetteer_links_company_names() {
    let dir = tempfile::tempdir().unwrap();
    crawled_kb(dir.path());
    let rust = Store::open(dir.path().join("kb")).unwrap();
    let company = rust.kb.companies().next().unwrap().clone();
    unsafe {
        let store = open(dir.path());
        let mut gaz = ptr::null_mut();
        assert_eq!(tkb_gazetteer_build(store, &mut gaz), TkbStatus::Ok);
        // The gazetteer owns its data; the store can go first.
        tkb_store_free(store);
        let text = c(&format!("The study is sponsored by {}.", company.canonical_name));
        let mut out = ptr::null_mut();
        assert_eq!(tkb_link_mentions_json(gaz, text.as_ptr(), &mut out), TkbStatus::Ok);
        let mentions: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert!(
            mentions.as_array().unwrap().iter().any(|m| m["resolved"] == company.id.as_str()),
            "{mentions}"
        );
        tkb_gazetteer_free(gaz);
    }
}

/// Every exported function is declared in the checked-in header, and the
/// header compiles as C when a compiler is available.
#[test]
fn header_declares_every_export() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let source = std::fs::read_to_string(root.join("src/lib.rs")).unwrap();
    let header = std::fs::read_to_string(root.join("include/trialkb.h")).unwrap();
    let exports: Vec<&str> = source
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15, "{exports:?}");
    for name in exports {
        let declared = [" ", "*"].iter().any(|pre| header.contains(&format!("{pre}{name}(")));
        assert!(declared, "{name} missing from header");
    }
    assert!(header.contains("typedef struct TkbStore TkbStore;"));

    if std::process::Command::new("cc").arg("--version").output().is_ok() {
        let dir = tempfile::tempdir().unwrap();
        let main = dir.path().join("main.c");
        std::fs::write(&main, "#include \"trialkb.h\"\nint main(void) { return tkb_version() == 0; }\n").unwrap();
        let status = std::process::Command::new("cc")
            .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
            .arg(root.join("include"))
            .arg(&main)
            .status()
            .unwrap();
        assert!(status.success());
    }
}
