#ifndef TRIALKB_H
#define TRIALKB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum TkbStatus {
  TKB_STATUS_OK = 0,
  // A required pointer argument was NULL.
  TKB_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  TKB_STATUS_INVALID_UTF8 = 2,
  // Reading or writing the knowledge base failed.
  TKB_STATUS_IO = 3,
  // The requested entity or change event does not exist.
  TKB_STATUS_NOT_FOUND = 4,
  // An argument or stored value failed validation.
  TKB_STATUS_VALIDATION = 5,
  // Input could not be parsed (a URL, a phone number, a status name).
  TKB_STATUS_PARSE = 6,
  // A panic or other unexpected failure.
  TKB_STATUS_INTERNAL = 99,
} TkbStatus;

// A name-variant index over the companies and persons of a store.
typedef struct TkbGazetteer TkbGazetteer;

// An open knowledge base directory.
typedef struct TkbStore TkbStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string. Do not free.
const char *tkb_version(void);

// Message of the last failed call on this thread, or NULL after a
// successful call. The pointer stays valid until the next call on this
// thread. Do not free.
const char *tkb_last_error(void);

// Release a string returned by this library. NULL is a no-op.
//
// # Safety
// `s` must be NULL or a pointer obtained from this library's out-parameters,
// not yet freed.
void tkb_string_free(char *s);

// Open the knowledge base directory `kb_path`. `snapshots_path` may be
// NULL; when given, statistics include crawled page counts.
//
// # Safety
// String arguments must be NULL or NUL-terminated; `out` must be writable.
enum TkbStatus tkb_store_open(const char *kb_path,
                              const char *snapshots_path,
                              struct TkbStore **out);

// Close a store. NULL is a no-op.
//
// # Safety
// `store` must be NULL or a handle from [`tkb_store_open`], not yet freed.
void tkb_store_free(struct TkbStore *store);

// Pipeline statistics as a JSON object.
//
// # Safety
// `store` must be a live handle; `out` must be writable.
enum TkbStatus tkb_store_stats_json(const struct TkbStore *store, char **out);

// One entity (company, person or trial) as JSON, or `TKB_STATUS_NOT_FOUND`.
//
// # Safety
// `store` must be a live handle; `id` NUL-terminated; `out` writable.
enum TkbStatus tkb_store_entity_json(const struct TkbStore *store, const char *id, char **out);

// A page of the review queue as JSON: `events`, `next_cursor`, `total`
// and per-status `counts`. `status` is NULL for all events or one of
// `pending`, `accepted`, `rejected`. `cursor` is 0 for the first page
// and otherwise the `next_cursor` of the previous page. `limit` must be
// between 1 and 500.
//
// # Safety
// `store` must be a live handle; `status` NULL or NUL-terminated; `out`
// writable.
enum TkbStatus tkb_store_list_changes_json(const struct TkbStore *store,
                                           const char *status,
                                           uint64_t cursor,
                                           uint32_t limit,
                                           char **out);

// Accept (`accept` nonzero) or reject a pending change event as
// `reviewer`, then persist the store. Deciding an already decided event
// changes nothing. When `out` is not NULL it receives the event as JSON.
//
// # Safety
// `store` must be a live handle not used concurrently; string arguments
// NUL-terminated; `out` NULL or writable.
enum TkbStatus tkb_store_decide(struct TkbStore *store,
                                const char *event_id,
                                bool accept,
                                const char *reviewer,
                                char **out);

// Build a gazetteer from the store's current companies and persons with
// default variant weights and linker thresholds.
//
// # Safety
// `store` must be a live handle; `out` writable.
enum TkbStatus tkb_gazetteer_build(const struct TkbStore *store, struct TkbGazetteer **out);

// Release a gazetteer. NULL is a no-op.
//
// # Safety
// `gazetteer` must be NULL or a handle from [`tkb_gazetteer_build`], not
// yet freed.
void tkb_gazetteer_free(struct TkbGazetteer *gazetteer);

// Entity mentions in `text` as a JSON array. Each element has
// `surface`, `span` (char offsets), ranked `candidates`, `resolved`
// (an entity id or null for NIL) and `confidence`.
//
// # Safety
// `gazetteer` must be a live handle; `text` NUL-terminated; `out` writable.
enum TkbStatus tkb_link_mentions_json(const struct TkbGazetteer *gazetteer,
                                      const char *text,
                                      char **out);

// Normalize a free-text trial phase to its code, e.g. `PHASE_2_3`.
// Unrecognized text yields `UNKNOWN`, not an error.
//
// # Safety
// `raw` NUL-terminated; `out` writable.
enum TkbStatus tkb_normalize_phase(const char *raw, char **out);

// Normalize a phone number to E.164. `country` is an ISO 3166 alpha-2
// hint for numbers without a country code and may be NULL. Invalid
// numbers return `TKB_STATUS_PARSE`.
//
// # Safety
// `raw` NUL-terminated; `country` NULL or NUL-terminated; `out` writable.
enum TkbStatus tkb_normalize_phone(const char *raw, const char *country, char **out);

// Canonical form of a URL, as used for fetch deduplication.
//
// # Safety
// `raw` NUL-terminated; `out` writable.
enum TkbStatus tkb_canonicalize_url(const char *raw, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRIALKB_H */
