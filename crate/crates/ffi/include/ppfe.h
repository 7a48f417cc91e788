#ifndef PPFE_H
#define PPFE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum {
  PPFE_STATUS_OK = 0,
  PPFE_STATUS_NULL_POINTER = 1,
  PPFE_STATUS_INVALID_ARGUMENT = 2,
  PPFE_STATUS_CONFIG = 3,
  PPFE_STATUS_NUMERICAL = 4,
  PPFE_STATUS_OVERFLOW = 5,
  PPFE_STATUS_IO = 6,
  // A Rust panic was caught at the boundary.
  PPFE_STATUS_INTERNAL = 7,
  // The requested data does not exist, e.g. no bound was computed.
  PPFE_STATUS_UNAVAILABLE = 8,
} PpfeStatus;

// Opaque Monte Carlo result handle.
typedef struct PpfeRunResult PpfeRunResult;

// Opaque scenario handle.
typedef struct PpfeScenario PpfeScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ppfe_version(void);

// Message of the last failed call on this thread, empty if none. Valid until
// the next failing call on the same thread.
const char *ppfe_last_error(void);

// Builds a named preset scenario.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
PpfeStatus ppfe_scenario_from_preset(const char *name, PpfeScenario **out);

// Builds a scenario from TOML text in the scenario-file format.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
PpfeStatus ppfe_scenario_from_toml(const char *text, PpfeScenario **out);

// # Safety
// `scenario` must come from a `ppfe_scenario_from_*` call and not be used
// afterwards. Null is ignored.
void ppfe_scenario_free(PpfeScenario *scenario);

// # Safety
// `scenario` must be a live handle.
PpfeStatus ppfe_scenario_set_seed(PpfeScenario *scenario, uint64_t seed);

// # Safety
// `scenario` must be a live handle.
PpfeStatus ppfe_scenario_set_trials(PpfeScenario *scenario, size_t trials);

// Changes the horizon. Fails for scenarios with a fixed outcome trace.
//
// # Safety
// `scenario` must be a live handle.
PpfeStatus ppfe_scenario_set_horizon(PpfeScenario *scenario, size_t horizon);

// Worker threads for Monte Carlo runs; 0 uses one per core.
//
// # Safety
// `scenario` must be a live handle.
PpfeStatus ppfe_scenario_set_workers(PpfeScenario *scenario, size_t workers);

// Runs the Monte Carlo experiment.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
PpfeStatus ppfe_run(const PpfeScenario *scenario, PpfeRunResult **out);

// # Safety
// `result` must come from [`ppfe_run`] and not be used afterwards. Null is
// ignored.
void ppfe_result_free(PpfeRunResult *result);

// Number of steps in each per-step series.
//
// # Safety
// `result` must be a live handle and `out` a valid pointer.
PpfeStatus ppfe_result_horizon(const PpfeRunResult *result, size_t *out);

// Copies the legitimate MSE series. `written`, when not null, receives the
// series length even if `capacity` is too small.
//
// # Safety
// `result` must be a live handle; `out` must hold `capacity` doubles.
PpfeStatus ppfe_result_mse_legit(const PpfeRunResult *result,
                                 double *out,
                                 size_t capacity,
                                 size_t *written);

// Copies the eavesdropper MSE series; saturated trials count as 1e30.
//
// # Safety
// As [`ppfe_result_mse_legit`].
PpfeStatus ppfe_result_mse_eve(const PpfeRunResult *result,
                               double *out,
                               size_t capacity,
                               size_t *written);

// Copies the trace of the empirical prediction-error covariance.
//
// # Safety
// As [`ppfe_result_mse_legit`].
PpfeStatus ppfe_result_trace_emp_cov(const PpfeRunResult *result,
                                     double *out,
                                     size_t capacity,
                                     size_t *written);

// Copies the trace of the covariance bound; `PPFE_STATUS_UNAVAILABLE` when
// the scenario did not request it.
//
// # Safety
// As [`ppfe_result_mse_legit`].
PpfeStatus ppfe_result_trace_bound(const PpfeRunResult *result,
                                   double *out,
                                   size_t capacity,
                                   size_t *written);

// Sum of per-channel capacities `−ln(1 − γ̄ᵢ)/2`; infinite if any `γ̄ᵢ = 1`.
//
// # Safety
// `gamma` must hold `len` doubles and `out` be a valid pointer.
PpfeStatus ppfe_total_capacity(const double *gamma, size_t len, double *out);

// Mahler measure and topological entropy of the row-major `n × n` matrix `a`.
//
// # Safety
// `a` must hold `n * n` doubles; the outputs must be valid pointers.
PpfeStatus ppfe_mahler(const double *a, size_t n, double *mahler, double *entropy);

// Probabilistic quantization of `x` on the lattice `delta·ℤ`, written to
// `out`. Draws come from the stream identified by `(seed, lane)`.
//
// # Safety
// `x` and `out` must hold `len` doubles.
PpfeStatus ppfe_quantize(const double *x,
                         size_t len,
                         double delta,
                         uint64_t seed,
                         uint32_t lane,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PPFE_H */
