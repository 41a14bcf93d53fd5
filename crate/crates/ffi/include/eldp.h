#ifndef ELDP_H
#define ELDP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EldpMethod {
  ELDP_METHOD_SIMPLE = 0,
  ELDP_METHOD_TANGENT = 1,
  ELDP_METHOD_ADAPTIVE = 2,
} EldpMethod;

// Result code of every fallible call.
typedef enum EldpStatus {
  ELDP_STATUS_OK = 0,
  // The solve finished but its gap is not certified; the report is still returned.
  ELDP_STATUS_NOT_CERTIFIED = 1,
  ELDP_STATUS_NULL_POINTER = 2,
  ELDP_STATUS_INVALID_UTF8 = 3,
  ELDP_STATUS_PARSE = 4,
  ELDP_STATUS_INVALID_PROBLEM = 5,
  ELDP_STATUS_INFEASIBLE = 6,
  ELDP_STATUS_INVALID_ARGUMENT = 7,
  ELDP_STATUS_TOO_LARGE = 8,
  ELDP_STATUS_IO = 9,
  ELDP_STATUS_PANIC = 10,
} EldpStatus;

// Opaque dispatch problem.
typedef struct EldpProblem EldpProblem;

// Opaque solve result.
typedef struct EldpReport EldpReport;

// Solver options. Fill with `eldp_options_default` before changing fields.
typedef struct EldpOptions {
  enum EldpMethod method;
  // Tangent angles in radians; used by the tangent method only.
  double theta1;
  double theta2;
  // Target gap of the adaptive method, $/h.
  double epsilon;
  size_t max_iterations;
  // Absolute gap of each surrogate solve, $/h.
  double gap_tol;
  size_t node_cap;
  // Nonzero enables the worker pool.
  int parallel;
  // Worker count in parallel mode; 0 picks the default.
  size_t threads;
} EldpOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays valid
// until the next failing call on the same thread.
const char *eldp_last_error(void);

// Writes the default options to `out`.
//
// # Safety
// `out` must be NULL or point to writable memory for one `EldpOptions`.
void eldp_options_default(struct EldpOptions *out);

// Parses a dataset in the text format (`demand D` then `a b c d e p_min p_max` rows).
//
// # Safety
// `text` must be a NUL-terminated string and `out` a writable pointer.
enum EldpStatus eldp_problem_from_text(const char *text, struct EldpProblem **out);

// Loads a bundled case: `case1`, `case2a`, `case2b` or `case3`.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a writable pointer.
enum EldpStatus eldp_problem_bundled(const char *name, struct EldpProblem **out);

// Releases a problem. NULL is ignored.
//
// # Safety
// `problem` must be NULL or a handle from this library not yet freed.
void eldp_problem_free(struct EldpProblem *problem);

// Number of generators, or 0 for NULL.
//
// # Safety
// `problem` must be NULL or a live handle.
size_t eldp_problem_num_generators(const struct EldpProblem *problem);

// Demand in MW, or NaN for NULL.
//
// # Safety
// `problem` must be NULL or a live handle.
double eldp_problem_demand(const struct EldpProblem *problem);

// True cost of the dispatch `p[0..len]` in $/h.
//
// # Safety
// `problem` must be a live handle, `p` must point to `len` doubles and `out` must be writable.
enum EldpStatus eldp_problem_total_cost(const struct EldpProblem *problem,
                                        const double *p,
                                        size_t len,
                                        double *out);

// Solves `problem`. NULL `options` selects the defaults. On `ELDP_STATUS_OK` or
// `ELDP_STATUS_NOT_CERTIFIED` a report is written to `out`; otherwise `*out` is NULL.
//
// # Safety
// `problem` must be a live handle, `options` NULL or valid, `out` writable.
enum EldpStatus eldp_solve(const struct EldpProblem *problem,
                           const struct EldpOptions *options,
                           struct EldpReport **out);

// Releases a report. NULL is ignored.
//
// # Safety
// `report` must be NULL or a handle from this library not yet freed.
void eldp_report_free(struct EldpReport *report);

// Copies up to `len` outputs (MW) into `buf` and returns the generator count.
// Call with `buf` NULL to query the size.
//
// # Safety
// `report` must be a live handle; `buf` NULL or writable for `len` doubles.
size_t eldp_report_dispatch(const struct EldpReport *report, double *buf, size_t len);

// True cost at the returned dispatch, $/h. NaN for NULL.
//
// # Safety
// `report` must be NULL or a live handle.
double eldp_report_total_cost(const struct EldpReport *report);

// Surrogate value at the returned dispatch, $/h.
//
// # Safety
// `report` must be NULL or a live handle.
double eldp_report_surrogate_value(const struct EldpReport *report);

// Certified lower bound, $/h.
//
// # Safety
// `report` must be NULL or a live handle.
double eldp_report_certified_bound(const struct EldpReport *report);

// Gap between the reported cost and the bound, $/h.
//
// # Safety
// `report` must be NULL or a live handle.
double eldp_report_absolute_gap(const struct EldpReport *report);

// Branch-and-bound nodes over all surrogate solves.
//
// # Safety
// `report` must be NULL or a live handle.
size_t eldp_report_nodes(const struct EldpReport *report);

// Adaptive iterations; 0 for the fixed-surrogate methods.
//
// # Safety
// `report` must be NULL or a live handle.
size_t eldp_report_iterations(const struct EldpReport *report);

// 1 when the result is certified, else 0.
//
// # Safety
// `report` must be NULL or a live handle.
int eldp_report_certified(const struct EldpReport *report);

// Wall-clock seconds.
//
// # Safety
// `report` must be NULL or a live handle.
double eldp_report_wall_time(const struct EldpReport *report);

// Writes the LP-format model of the simple or tangent surrogate to `path`.
//
// # Safety
// `problem` must be a live handle, `options` NULL or valid, `path` a NUL-terminated string.
enum EldpStatus eldp_export_lp(const struct EldpProblem *problem,
                               const struct EldpOptions *options,
                               const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELDP_H */
