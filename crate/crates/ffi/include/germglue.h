#ifndef GERMGLUE_H
#define GERMGLUE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result of a call. The numeric values of the error classes match the CLI exit codes.
typedef enum GgStatus {
  GG_STATUS_OK = 0,
  // Input parsed but failed a mathematical check (cocycle, agreement, invertibility).
  GG_STATUS_VALIDATION = 2,
  // A shrinking search ran out of budget or the cover lost a base point.
  GG_STATUS_OBSTRUCTION = 3,
  // Malformed document, wrong dimensions, or I/O failure.
  GG_STATUS_INPUT = 4,
  GG_STATUS_NULL_POINTER = 5,
  GG_STATUS_INVALID_UTF8 = 6,
  // A Rust panic was caught at the boundary.
  GG_STATUS_PANIC = 7,
} GgStatus;

// A parsed germ atlas: charts, transitions and sample points at a fixed truncation order.
typedef struct GgAtlas GgAtlas;

// The result of gluing a [`GgAtlas`].
typedef struct GgGluedAtlas GgGluedAtlas;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *gg_version(void);

// Message of the last failed call on this thread, or null after a successful call.
// The pointer stays valid until the next call into the library on the same thread.
const char *gg_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string returned through an `out` parameter of this library,
// not freed before.
void gg_string_free(char *s);

// Parses an atlas document. `order` of 0 keeps the declared truncation order; a positive
// `float_tolerance` switches to floating-point coefficients compared with that tolerance.
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` a writable pointer.
enum GgStatus gg_atlas_parse(const char *json,
                             uint32_t order,
                             double float_tolerance,
                             struct GgAtlas **out);

// Checks zero-section, inverse-pair and cocycle identities; writes the report as JSON.
//
// # Safety
// `atlas` must be a live handle and `out_report` a writable pointer.
enum GgStatus gg_atlas_validate(const struct GgAtlas *atlas, char **out_report);

// Runs the full gluing pipeline. `n_max` of 0 keeps the default search budget.
//
// # Safety
// `atlas` must be a live handle and `out` a writable pointer.
enum GgStatus gg_atlas_glue(const struct GgAtlas *atlas, uint64_t n_max, struct GgGluedAtlas **out);

// # Safety
// `atlas` must be null or a live handle; it must not be used afterwards.
void gg_atlas_free(struct GgAtlas *atlas);

// Number of charts of a glued atlas, or 0 for a null handle.
//
// # Safety
// `glued` must be null or a live handle.
size_t gg_glued_atlas_chart_count(const struct GgGluedAtlas *glued);

// Whether the glued atlas carries a Hausdorff certificate; false for a null handle.
//
// # Safety
// `glued` must be null or a live handle.
bool gg_glued_atlas_is_hausdorff(const struct GgGluedAtlas *glued);

// # Safety
// `glued` must be a live handle and `out_json` a writable pointer.
enum GgStatus gg_glued_atlas_to_json(const struct GgGluedAtlas *glued, char **out_json);

// # Safety
// `glued` must be null or a live handle; it must not be used afterwards.
void gg_glued_atlas_free(struct GgGluedAtlas *glued);

// Checks one TEP chart at its base point. The axioms failing is not an error: the
// report says so, and `out_axioms_hold` (when non-null) receives the verdict.
//
// # Safety
// `json` must be a valid NUL-terminated string, `out_report` writable, and
// `out_axioms_hold` null or writable.
enum GgStatus gg_tep_check(const char *json,
                           uint64_t seed,
                           char **out_report,
                           bool *out_axioms_hold);

// Runs a batch job described in JSON, exactly as the command-line tool would, and returns
// its report document. The job names a `command` and its input paths; omitted settings take
// the command-line defaults. A job that runs but fails still returns `Ok`, with the tool's
// exit code in `out_exit_code`.
//
// # Safety
// `job_json` must be a valid NUL-terminated string, `out_report` writable, and
// `out_exit_code` null or writable.
enum GgStatus gg_run_job(const char *job_json, char **out_report, int32_t *out_exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GERMGLUE_H */
