//! C ABI over the trialkb knowledge base.
//!
//! Conventions shared by every function:
//!
//! - Functions return a [`TkbStatus`]; on anything but `TKB_STATUS_OK` the
//!   message is available from [`tkb_last_error`] on the same thread.
//! - Results come back through out-parameters. Strings written there are
//!   owned by the caller and released with [`tkb_string_free`].
//! - Handles ([`TkbStore`], [`TkbGazetteer`]) are opaque and released with
//!   their matching `_free` function. Passing NULL to a `_free` function is
//!   a no-op.
//! - Panics never cross the boundary; they surface as
//!   `TKB_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use trialkb::crawl::SnapshotStore;
use trialkb::extract::{link_mentions, normalize_phase, normalize_phone, Gazetteer, LinkerConfig, VariantWeights};
use trialkb::fusion::{apply_change, Decision, EventStatus, FusionError};
use trialkb::harvest::canonicalize_url;
use trialkb::service::list_changes;
use trialkb::{compute_stats, Clock, EntityId, KbError, Store, SystemClock};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TkbStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Reading or writing the knowledge base failed.
    Io = 3,
    /// The requested entity or change event does not exist.
    NotFound = 4,
    /// An argument or stored value failed validation.
    Validation = 5,
    /// Input could not be parsed (a URL, a phone number, a status name).
    Parse = 6,
    /// A panic or other unexpected failure.
    Internal = 99,
}

/// An open knowledge base directory.
pub struct TkbStore {
    store: Store,
    snapshots: Option<SnapshotStore>,
}

/// A name-variant index over the companies and persons of a store.
pub struct TkbGazetteer {
    gazetteer: Gazetteer,
    linker: LinkerConfig,
}

struct Failure {
    status: TkbStatus,
    message: String,
}

impl Failure {
    fn new(status: TkbStatus, message: impl Into<String>) -> Self {
        Failure { status, message: message.into() }
    }
}

impl From<KbError> for Failure {
    fn from(e: KbError) -> Self {
        let status = match &e {
            KbError::Io { .. } | KbError::MissingPath(_) | KbError::Json { .. } => TkbStatus::Io,
            KbError::NotFound(_) => TkbStatus::NotFound,
            KbError::BadPredicate(_) => TkbStatus::Parse,
            _ => TkbStatus::Validation,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<FusionError> for Failure {
    fn from(e: FusionError) -> Self {
        let status = match &e {
            FusionError::NotFound(_) => TkbStatus::NotFound,
            FusionError::Apply { .. } | FusionError::BadValue { .. } => TkbStatus::Validation,
        };
        Failure::new(status, e.to_string())
    }
}

fn json_failure(e: serde_json::Error) -> Failure {
    Failure::new(TkbStatus::Internal, format!("serialization failed: {e}"))
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    // Interior NULs cannot cross the boundary; replace rather than drop.
    let c = CString::new(message.replace('\0', "?")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Run `f`, translating failures and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TkbStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TkbStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal error: {message}"));
            TkbStatus::Internal
        }
    }
}

/// Borrow a required C string argument.
///
/// # Safety
/// `p` must be NULL or point to a NUL-terminated string.
unsafe fn arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(TkbStatus::NullArgument, format!("`{name}` is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(TkbStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

/// Borrow an optional C string argument; NULL is `None`.
unsafe fn opt_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        arg(p, name).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(TkbStatus::NullArgument, format!("`{name}` is NULL")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(TkbStatus::NullArgument, format!("`{name}` is NULL")))
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(TkbStatus::NullArgument, "`out` is NULL"))
    } else {
        Ok(())
    }
}

/// Hand a string to the caller through `out`.
unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure::new(TkbStatus::Internal, "result contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn tkb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a
/// successful call. The pointer stays valid until the next call on this
/// thread. Do not free.
#[no_mangle]
pub extern "C" fn tkb_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library's out-parameters,
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tkb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Open the knowledge base directory `kb_path`. `snapshots_path` may be
/// NULL; when given, statistics include crawled page counts.
///
/// # Safety
/// String arguments must be NULL or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tkb_store_open(
    kb_path: *const c_char,
    snapshots_path: *const c_char,
    out: *mut *mut TkbStore,
) -> TkbStatus {
    guard(|| {
        check_out(out)?;
        let path = arg(kb_path, "kb_path")?;
        let snapshots = opt_arg(snapshots_path, "snapshots_path")?.map(SnapshotStore::new);
        let store = Store::open(path)?;
        *out = Box::into_raw(Box::new(TkbStore { store, snapshots }));
        Ok(())
    })
}

/// Close a store. NULL is a no-op.
///
/// # Safety
/// `store` must be NULL or a handle from [`tkb_store_open`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tkb_store_free(store: *mut TkbStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Pipeline statistics as a JSON object.
///
/// # Safety
/// `store` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tkb_store_stats_json(store: *const TkbStore, out: *mut *mut c_char) -> TkbStatus {
    guard(|| {
        check_out(out)?;
        let s = handle(store, "store")?;
        let stats = compute_stats(&s.store.kb, s.snapshots.as_ref());
        write_string(out, serde_json::to_string(&stats).map_err(json_failure)?)
    })
}

/// One entity (company, person or trial) as JSON, or `TKB_STATUS_NOT_FOUND`.
///
/// # Safety
/// `store` must be a live handle; `id` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tkb_store_entity_json(
    store: *const TkbStore,
    id: *const c_char,
    out: *mut *mut c_char,
) -> TkbStatus {
    guard(|| {
        check_out(out)?;
        let s = handle(store, "store")?;
        let id = arg(id, "id")?;
        let entity = s
            .store
            .kb
            .get(&EntityId::from(id))
            .ok_or_else(|| Failure::new(TkbStatus::NotFound, format!("entity `{id}` not found")))?;
        write_string(out, serde_json::to_string(&entity).map_err(json_failure)?)
    })
}

/// A page of the review queue as JSON: `events`, `next_cursor`, `total`
/// and per-status `counts`. `status` is NULL for all events or one of
/// `pending`, `accepted`, `rejected`. `cursor` is 0 for the first page
/// and otherwise the `next_cursor` of the previous page. `limit` must be
/// between 1 and 500.
///
/// # Safety
/// `store` must be a live handle; `status` NULL or NUL-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tkb_store_list_changes_json(
    store: *const TkbStore,
    status: *const c_char,
    cursor: u64,
    limit: u32,
    out: *mut *mut c_char,
) -> TkbStatus {
    guard(|| {
        check_out(out)?;
        let s = handle(store, "store")?;
        let status = match opt_arg(status, "status")? {
            None => None,
            Some(name) => Some(
                EventStatus::parse(name)
                    .ok_or_else(|| Failure::new(TkbStatus::Parse, format!("unknown status `{name}`")))?,
            ),
        };
        if !(1..=500).contains(&limit) {
            return Err(Failure::new(TkbStatus::Validation, format!("limit {limit} outside 1..=500")));
        }
        let view = list_changes(s.store.events.events(), status, cursor, limit as usize);
        write_string(out, serde_json::to_string(&view).map_err(json_failure)?)
    })
}

/// Accept (`accept` nonzero) or reject a pending change event as
/// `reviewer`, then persist the store. Deciding an already decided event
/// changes nothing. When `out` is not NULL it receives the event as JSON.
///
/// # Safety
/// `store` must be a live handle not used concurrently; string arguments
/// NUL-terminated; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn tkb_store_decide(
    store: *mut TkbStore,
    event_id: *const c_char,
    accept: bool,
    reviewer: *const c_char,
    out: *mut *mut c_char,
) -> TkbStatus {
    guard(|| {
        let s = handle_mut(store, "store")?;
        let event_id = arg(event_id, "event_id")?;
        let reviewer = arg(reviewer, "reviewer")?;
        if reviewer.trim().is_empty() {
            return Err(Failure::new(TkbStatus::Validation, "`reviewer` is empty"));
        }
        let decision = if accept { Decision::Accept } else { Decision::Reject };
        let store = &mut s.store;
        let event = apply_change(event_id, decision, reviewer, &mut store.kb, &mut store.events, SystemClock.now())?;
        store.checkpoint()?;
        if !out.is_null() {
            write_string(out, serde_json::to_string(&event).map_err(json_failure)?)?;
        }
        Ok(())
    })
}

/// Build a gazetteer from the store's current companies and persons with
/// default variant weights and linker thresholds.
///
/// # Safety
/// `store` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tkb_gazetteer_build(store: *const TkbStore, out: *mut *mut TkbGazetteer) -> TkbStatus {
    guard(|| {
        check_out(out)?;
        let s = handle(store, "store")?;
        let gazetteer = Gazetteer::build(&s.store.kb, VariantWeights::default());
        *out = Box::into_raw(Box::new(TkbGazetteer { gazetteer, linker: LinkerConfig::default() }));
        Ok(())
    })
}

/// Release a gazetteer. NULL is a no-op.
///
/// # Safety
/// `gazetteer` must be NULL or a handle from [`tkb_gazetteer_build`], not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn tkb_gazetteer_free(gazetteer: *mut TkbGazetteer) {
    if !gazetteer.is_null() {
        drop(Box::from_raw(gazetteer));
    }
}

/// Entity mentions in `text` as a JSON array. Each element has
/// `surface`, `span` (char offsets), ranked `candidates`, `resolved`
/// (an entity id or null for NIL) and `confidence`.
///
/// # Safety
/// `gazetteer` must be a live handle; `text` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tkb_link_mentions_json(
    gazetteer: *const TkbGazetteer,
    text: *const c_char,
    out: *mut *mut c_char,
) -> TkbStatus {
    guard(|| {
        check_out(out)?;
        let g = handle(gazetteer, "gazetteer")?;
        let text = arg(text, "text")?;
        let mentions = link_mentions(text, &g.gazetteer, &g.linker);
        write_string(out, serde_json::to_string(&mentions).map_err(json_failure)?)
    })
}

/// Normalize a free-text trial phase to its code, e.g. `PHASE_2_3`.
/// Unrecognized text yields `UNKNOWN`, not an error.
///
/// # Safety
/// `raw` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tkb_normalize_phase(raw: *const c_char, out: *mut *mut c_char) -> TkbStatus {
    guard(|| {
        check_out(out)?;
        let phase = normalize_phase(arg(raw, "raw")?);
        write_string(out, phase.as_str().to_string())
    })
}

/// Normalize a phone number to E.164. `country` is an ISO 3166 alpha-2
/// hint for numbers without a country code and may be NULL. Invalid
/// numbers return `TKB_STATUS_PARSE`.
///
/// # Safety
/// `raw` NUL-terminated; `country` NULL or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tkb_normalize_phone(
    raw: *const c_char,
    country: *const c_char,
    out: *mut *mut c_char,
) -> TkbStatus {
    guard(|| {
        check_out(out)?;
        let raw = arg(raw, "raw")?;
        let country = opt_arg(country, "country")?;
        let e164 = normalize_phone(raw, country).map_err(|e| Failure::new(TkbStatus::Parse, e.to_string()))?;
        write_string(out, e164)
    })
}

/// Canonical form of a URL, as used for fetch deduplication.
///
/// # Safety
/// `raw` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tkb_canonicalize_url(raw: *const c_char, out: *mut *mut c_char) -> TkbStatus {
    guard(|| {
        check_out(out)?;
        let url = canonicalize_url(arg(raw, "raw")?).map_err(|e| Failure::new(TkbStatus::Parse, e.to_string()))?;
        write_string(out, url)
    })
}
