/* modcert C API: failure-probability certification for modular systems. */

#ifndef MODCERT_H
#define MODCERT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every exported function.
typedef enum ModcertStatus {
  MODCERT_STATUS_OK = 0,
  // A required pointer was null or a string was not UTF-8.
  MODCERT_STATUS_INVALID_ARGUMENT = 1,
  MODCERT_STATUS_VALIDATION = 2,
  MODCERT_STATUS_ASSUMPTION_VIOLATED = 3,
  MODCERT_STATUS_CAPACITY = 4,
  MODCERT_STATUS_PARSE = 5,
  MODCERT_STATUS_IO = 6,
  // A Rust panic was caught at the boundary.
  MODCERT_STATUS_INTERNAL = 7,
} ModcertStatus;

// Output format selector for [`modcert_report_render`].
typedef enum ModcertFormat {
  MODCERT_FORMAT_JSON = 0,
  MODCERT_FORMAT_TEXT = 1,
} ModcertFormat;

// Opaque joint indicator model.
typedef struct ModcertModel ModcertModel;

// Opaque certification report.
typedef struct ModcertReport ModcertReport;

// A probability bound. `log_value` is meaningful only when `is_zero` is false.
typedef struct ModcertProbBound {
  double value;
  double log_value;
  bool is_zero;
} ModcertProbBound;

typedef struct ModcertPlan {
  uint64_t samples_required;
  uint64_t decision_threshold;
  double achieved_alpha;
  double achieved_beta;
} ModcertPlan;

typedef struct ModcertCoverage {
  uint64_t trials;
  uint64_t violations;
  double coverage;
  uint64_t base_seed;
} ModcertCoverage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or NULL. The pointer
// stays valid until the next call into the library on the same thread.
const char *modcert_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *modcert_version(void);

// Single-indicator Bernstein upper bound.
//
// # Safety
// `out` must be a valid pointer to a `ModcertProbBound`.
enum ModcertStatus modcert_bernstein_upper_bound(uint64_t failures,
                                                 uint64_t trials,
                                                 double delta,
                                                 struct ModcertProbBound *out);

// Composed bound over `len` indicators.
//
// # Safety
// `failures`, `trials` and `factors` must each point to `len` readable
// elements; `out` must be valid for writes.
enum ModcertStatus modcert_composition_bound(const uint64_t *failures,
                                             const uint64_t *trials,
                                             const double *factors,
                                             size_t len,
                                             double delta,
                                             struct ModcertProbBound *out);

// `min(1, prod c_t p_t)` for known marginals.
//
// # Safety
// `marginals` and `factors` must point to `len` readable elements; `out`
// must be valid for writes.
enum ModcertStatus modcert_conjunction_bound_analytic(const double *marginals,
                                                      const double *factors,
                                                      size_t len,
                                                      struct ModcertProbBound *out);

// System bound from `len` module bounds and a residual. Returns
// `AssumptionViolated` when the module bounds sum above 0.5; the sum is
// then written to `out_sum` if it is non-null.
//
// # Safety
// `module_bounds` must point to `len` readable elements (or be NULL when
// `len` is 0); `out` must be valid for writes; `out_sum` may be NULL.
enum ModcertStatus modcert_system_bound(const double *module_bounds,
                                        size_t len,
                                        double residual,
                                        struct ModcertProbBound *out,
                                        double *out_sum);

// Minimal end-to-end validation sample size.
//
// # Safety
// `out` must be valid for writes.
enum ModcertStatus modcert_validation_sample_size(double epsilon,
                                                  double delta,
                                                  struct ModcertPlan *out);

// Minimal per-indicator samples for the modular plan with zero observed failures.
//
// # Safety
// `out` must be valid for writes.
enum ModcertStatus modcert_modular_certification_plan(double target,
                                                      size_t indicator_count,
                                                      double factor,
                                                      double delta,
                                                      uint64_t *out);

// Independent-indicator model.
//
// # Safety
// `marginals` must point to `len` readable elements; `out` must be valid
// for writes. Release the result with [`modcert_model_free`].
enum ModcertStatus modcert_model_independent(const double *marginals,
                                             size_t len,
                                             struct ModcertModel **out);

// Common-cause mixture model.
//
// # Safety
// `base_rates` and `fault_rates` must point to `len` readable elements;
// `out` must be valid for writes.
enum ModcertStatus modcert_model_common_cause(double q,
                                              const double *base_rates,
                                              const double *fault_rates,
                                              size_t len,
                                              struct ModcertModel **out);

// Model from a JSON model specification.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid for writes.
enum ModcertStatus modcert_model_from_json(const char *json, struct ModcertModel **out);

// # Safety
// `model` must come from a `modcert_model_*` constructor and not be used
// afterwards. NULL is ignored.
void modcert_model_free(struct ModcertModel *model);

// Number of indicators in `model`, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t modcert_model_indicator_count(const struct ModcertModel *model);

// Exact marginals, independence factors and conjunction probability.
// `marginals` and `factors` receive `capacity` elements at most; the model
// must have no more indicators than `capacity`.
//
// # Safety
// `model` must be a live handle; `marginals` and `factors` must be valid for
// `capacity` writes; `conjunction` must be valid for writes.
enum ModcertStatus modcert_model_exact_statistics(const struct ModcertModel *model,
                                                  double *marginals,
                                                  double *factors,
                                                  size_t capacity,
                                                  double *conjunction);

// Monte Carlo coverage of the composed bound on `model`.
//
// # Safety
// `model` must be a live handle; `out` must be valid for writes.
enum ModcertStatus modcert_coverage_experiment(const struct ModcertModel *model,
                                               uint64_t samples,
                                               double delta,
                                               uint64_t trials,
                                               uint64_t base_seed,
                                               struct ModcertCoverage *out);

// Run the scenario config at `path`. A report whose union-bound
// certificate failed is still returned, with status `AssumptionViolated`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid for writes.
// Release the result with [`modcert_report_free`].
enum ModcertStatus modcert_run_scenario_file(const char *path, struct ModcertReport **out);

// System bound of a certified report.
//
// # Safety
// `report` must be a live handle; `out` must be valid for writes.
enum ModcertStatus modcert_report_system_bound(const struct ModcertReport *report,
                                               struct ModcertProbBound *out);

// Render a report. The returned string must be released with
// [`modcert_string_free`]; NULL on failure.
//
// # Safety
// `report` must be a live handle.
char *modcert_report_render(const struct ModcertReport *report, enum ModcertFormat format);

// # Safety
// `report` must come from [`modcert_run_scenario_file`] and not be used
// afterwards. NULL is ignored.
void modcert_report_free(struct ModcertReport *report);

// # Safety
// `s` must be a string returned by this library and not yet freed. NULL is ignored.
void modcert_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODCERT_H */
