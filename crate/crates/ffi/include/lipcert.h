#ifndef LIPCERT_H
#define LIPCERT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Pipeline stages accepted by [`lc_run`].
typedef enum LcStage {
  LC_STAGE_CHECK = 0,
  LC_STAGE_CONJUGATE = 1,
  LC_STAGE_SOLVE = 2,
  LC_STAGE_CERTIFY = 3,
  LC_STAGE_REPAIR = 4,
  LC_STAGE_RUN = 5,
} LcStage;

// Status codes returned by every fallible entry point.
typedef enum LcStatus {
  LC_STATUS_OK = 0,
  // A required pointer argument was null.
  LC_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  LC_STATUS_INVALID_UTF8 = 2,
  // The scenario text or file could not be parsed or failed validation.
  LC_STATUS_SCENARIO = 3,
  // Reading or writing files failed.
  LC_STATUS_IO = 4,
  // A structural hypothesis was rejected before any computation.
  LC_STATUS_HYPOTHESIS = 5,
  // A numerical routine reported an error (bad argument, contract violation).
  LC_STATUS_NUMERICAL = 6,
  // The caller's buffer is too small; the required length was reported.
  LC_STATUS_BUFFER_TOO_SMALL = 7,
  // An unknown stage code was passed.
  LC_STATUS_INVALID_STAGE = 8,
  // A Rust panic was caught at the boundary.
  LC_STATUS_PANIC = 9,
} LcStatus;

// Result of one pipeline run: mesh, report and artifacts.
typedef struct LcRun LcRun;

// Parsed, validated scenario.
typedef struct LcScenario LcScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string. Do not free.
const char *lc_version(void);

// Copies the last error message of the calling thread into `buf`
// (NUL-terminated, truncated to `len` bytes) and returns the full message
// length excluding the terminator, or 0 when there is no error.
//
// # Safety
// `buf` is null or points to at least `len` writable bytes.
size_t lc_last_error(char *buf, size_t len);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` is null or was returned by this library and not yet freed.
void lc_string_free(char *s);

// Newline-separated listing of the built-in Lagrangians, traces and sources.
// Free with [`lc_string_free`].
char *lc_catalog(void);

// Parses and validates a scenario from TOML text. Relative CSV paths are
// resolved against the current directory.
//
// # Safety
// `toml` is a valid NUL-terminated string; `out` is a valid pointer.
enum LcStatus lc_scenario_from_toml(const char *toml, struct LcScenario **out);

// Loads and validates a scenario file; relative CSV paths resolve against
// the file's directory.
//
// # Safety
// `path` is a valid NUL-terminated string; `out` is a valid pointer.
enum LcStatus lc_scenario_load(const char *path, struct LcScenario **out);

// Scenario name. Free with [`lc_string_free`]; null if `s` is null.
//
// # Safety
// `s` is null or a live handle.
char *lc_scenario_name(const struct LcScenario *s);

// Releases a scenario. Null is ignored.
//
// # Safety
// `s` is null or a live handle not used afterwards.
void lc_scenario_free(struct LcScenario *s);

// Runs the pipeline up to `stage` (an [`LcStage`] value). Certificate
// failures are findings, not errors: the call still returns `Ok` and the
// verdict is in [`lc_run_exit_code`] and the report.
//
// # Safety
// `s` is a live scenario handle; `out` is a valid pointer.
enum LcStatus lc_run(const struct LcScenario *s, int32_t stage, struct LcRun **out);

// Exit code of the run: 0 success, 1 internal error, 2 hypothesis failure,
// 3 nonconvergence, 4 certificate failure; -1 for a null handle.
//
// # Safety
// `r` is null or a live handle.
int32_t lc_run_exit_code(const struct LcRun *r);

// Number of failures recorded in the report; 0 for a null handle.
//
// # Safety
// `r` is null or a live handle.
size_t lc_run_failure_count(const struct LcRun *r);

// The JSON report, borrowed from the handle and valid until
// [`lc_run_free`]. Null for a null handle.
//
// # Safety
// `r` is null or a live handle.
const char *lc_run_report_json(const struct LcRun *r);

// Number of mesh vertices; 0 for a null handle.
//
// # Safety
// `r` is null or a live handle.
size_t lc_run_vertex_count(const struct LcRun *r);

// Copies the final per-vertex solution (the repaired field when a repair
// ran) into `buf`. `len` is the buffer length in doubles; `written`
// receives the number of values. Returns `BufferTooSmall` with `written`
// set to the required length when `len` is too small, and `Numerical`
// when the stage produced no solution.
//
// # Safety
// `r` is a live handle; `buf` points to `len` writable doubles or is null
// with `len == 0`; `written` is a valid pointer.
enum LcStatus lc_run_solution(const struct LcRun *r, double *buf, size_t len, size_t *written);

// Copies vertex coordinates as interleaved (x, y) pairs; same buffer
// protocol as [`lc_run_solution`] with `len` counted in doubles.
//
// # Safety
// As for [`lc_run_solution`].
enum LcStatus lc_run_vertices(const struct LcRun *r, double *buf, size_t len, size_t *written);

// Writes the output bundle (report.json, CSV files, patches.jsonl) into
// `dir`, creating it if needed.
//
// # Safety
// `r` is a live handle; `dir` is a valid NUL-terminated string.
enum LcStatus lc_run_write_bundle(const struct LcRun *r, const char *dir);

// Releases a run. Null is ignored.
//
// # Safety
// `r` is null or a live handle not used afterwards.
void lc_run_free(struct LcRun *r);

// Boundary Hölder exponent (2p−n−1)/(4p+n−3) for growth order `p` in
// dimension `n`. Rejects p ≤ (n+1)/2.
//
// # Safety
// `out` is a valid pointer.
enum LcStatus lc_holder_exponent(double p, double n, double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* LIPCERT_H */
