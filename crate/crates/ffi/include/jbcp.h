/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef JBCP_H
#define JBCP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Error codes returned by every fallible function.
typedef enum JbcpStatus {
  JBCP_STATUS_OK = 0,
  JBCP_STATUS_NULL_POINTER = 1,
  JBCP_STATUS_INVALID_UTF8 = 2,
  JBCP_STATUS_INVALID_INPUT = 3,
  JBCP_STATUS_IO = 4,
  JBCP_STATUS_JSON = 5,
  JBCP_STATUS_INFEASIBLE = 6,
  JBCP_STATUS_NOT_CONVERGED = 7,
  JBCP_STATUS_BUFFER_TOO_SMALL = 8,
  JBCP_STATUS_PANIC = 99,
} JbcpStatus;

typedef enum JbcpMethod {
  JBCP_METHOD_PEGA = 0,
  JBCP_METHOD_PIGA = 1,
  JBCP_METHOD_PSGA = 2,
  JBCP_METHOD_SDR = 3,
} JbcpMethod;

// How a solve ended (distinct from the call's own [`JbcpStatus`]).
typedef enum JbcpRunStatus {
  JBCP_RUN_STATUS_CONVERGED = 0,
  JBCP_RUN_STATUS_MAX_ITERATIONS = 1,
  JBCP_RUN_STATUS_INFEASIBLE = 2,
  JBCP_RUN_STATUS_FAILED = 3,
} JbcpRunStatus;

// Opaque network instance.
typedef struct JbcpInstance JbcpInstance;

// Opaque result of one solve.
typedef struct JbcpOutcome JbcpOutcome;

// Optimizer knobs; zero or negative fields select the library default.
typedef struct JbcpSolveOptions {
  double eps_out;
  size_t max_outer;
  double feasibility_tolerance;
} JbcpSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or NULL. Owned by the
// library; valid until the next failing call on the same thread.
const char *jbcp_last_error(void);

// Library version as a static NUL-terminated string.
const char *jbcp_version(void);

// # Safety
// `s` must be NULL or a string returned by this library.
void jbcp_string_free(char *s);

// Parses an instance from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string; `out` a valid pointer.
enum JbcpStatus jbcp_instance_from_json(const char *json, struct JbcpInstance **out);

// Loads an instance JSON file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` a valid pointer.
enum JbcpStatus jbcp_instance_load(const char *path, struct JbcpInstance **out);

// # Safety
// `inst` must be NULL or a handle from this library not yet freed.
void jbcp_instance_free(struct JbcpInstance *inst);

// Number of BSs, or 0 for NULL.
//
// # Safety
// `inst` must be NULL or a live handle.
size_t jbcp_instance_num_bs(const struct JbcpInstance *inst);

// Number of users, or 0 for NULL.
//
// # Safety
// `inst` must be NULL or a live handle.
size_t jbcp_instance_num_users(const struct JbcpInstance *inst);

// Emits the relaxation's cone program as JSON, or the inner program when
// `multipliers` (length `num_bs`) is non-NULL.
//
// # Safety
// `inst` must be live; `multipliers` NULL or `len` readable doubles; `out`
// valid. Release the string with [`jbcp_string_free`].
enum JbcpStatus jbcp_dump_cone(const struct JbcpInstance *inst,
                               const double *multipliers,
                               size_t len,
                               char **out);

// Runs one method. A solve that ends infeasible or at the iteration cap
// still returns `Ok` with an outcome; inspect [`jbcp_outcome_status`].
//
// # Safety
// `inst` must be live; `options` NULL or valid; `out` valid.
enum JbcpStatus jbcp_solve(const struct JbcpInstance *inst,
                           enum JbcpMethod method,
                           const struct JbcpSolveOptions *options,
                           struct JbcpOutcome **out);

// # Safety
// `o` must be NULL or a handle from this library not yet freed.
void jbcp_outcome_free(struct JbcpOutcome *o);

// # Safety
// `o` must be a live handle.
enum JbcpRunStatus jbcp_outcome_status(const struct JbcpOutcome *o);

// Dual value for the ascents, relaxation optimum for `Sdr`; NaN on NULL or
// failure.
//
// # Safety
// `o` must be NULL or a live handle.
double jbcp_outcome_objective(const struct JbcpOutcome *o);

// Total power of the returned design.
//
// # Safety
// `o` must be NULL or a live handle.
double jbcp_outcome_design_power(const struct JbcpOutcome *o);

// # Safety
// `o` must be NULL or a live handle.
size_t jbcp_outcome_outer_iterations(const struct JbcpOutcome *o);

// # Safety
// `o` must be NULL or a live handle.
size_t jbcp_outcome_inner_iterations(const struct JbcpOutcome *o);

// Whether the extracted beamformers meet every constraint and all
// covariances are rank one.
//
// # Safety
// `o` must be NULL or a live handle.
bool jbcp_outcome_feasible(const struct JbcpOutcome *o);

// Copies the final multipliers (empty for `Sdr`) into `buf`. `*len`
// always receives the required count; pass `buf = NULL` to query it.
//
// # Safety
// `o` live; `buf` NULL or `cap` writable doubles; `len` valid.
enum JbcpStatus jbcp_outcome_multipliers(const struct JbcpOutcome *o,
                                         double *buf,
                                         size_t cap,
                                         size_t *len);

// Copies the per-BS transmit power of the design into `buf`; same
// conventions as [`jbcp_outcome_multipliers`].
//
// # Safety
// `o` live; `buf` NULL or `cap` writable doubles; `len` valid.
enum JbcpStatus jbcp_outcome_antenna_power(const struct JbcpOutcome *o,
                                           double *buf,
                                           size_t cap,
                                           size_t *len);

// The full outcome as JSON (same form the CLI prints).
//
// # Safety
// `o` live; `out` valid. Release with [`jbcp_string_free`].
enum JbcpStatus jbcp_outcome_to_json(const struct JbcpOutcome *o, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JBCP_H */
