#ifndef REGEN_H
#define REGEN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RegenStatus {
  REGEN_STATUS_OK = 0,
  REGEN_STATUS_NULL_POINTER = 1,
  REGEN_STATUS_INVALID_UTF8 = 2,
  REGEN_STATUS_DOMAIN = 3,
  REGEN_STATUS_VALIDATION = 4,
  REGEN_STATUS_BUDGET = 5,
  REGEN_STATUS_PRECONDITION = 6,
  REGEN_STATUS_HYPOTHESIS = 7,
  REGEN_STATUS_CONFIG = 8,
  REGEN_STATUS_IO = 9,
  REGEN_STATUS_PANIC = 10,
} RegenStatus;

/**
 * A validated cycle model.
 */
typedef struct RegenModel RegenModel;

/**
 * Renewal function values on a grid.
 */
typedef struct RegenRenewalTable RegenRenewalTable;

/**
 * A simulated trajectory covering `[0, horizon]`.
 */
typedef struct RegenTrajectory RegenTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *regen_version(void);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on this thread.
 */
const char *regen_last_error_message(void);

/**
 * Builds a model from a TOML table such as `kind = "poisson_count"\nrate = 2.0`.
 *
 * # Safety
 * `toml` must be a valid NUL-terminated string; `out` must be writable.
 */
enum RegenStatus regen_model_from_toml(const char *toml, struct RegenModel **out);

/**
 * # Safety
 * `model` must come from [`regen_model_from_toml`] and not be used again.
 */
void regen_model_free(struct RegenModel *model);

/**
 * Declared `mu`, `a` and `sigma2` of the model.
 *
 * # Safety
 * `model` must be a live handle; the out pointers must be writable.
 */
enum RegenStatus regen_model_known_moments(const struct RegenModel *model,
                                           double *mu,
                                           double *a,
                                           double *sigma2);

/**
 * Simulates cycles until `horizon` is covered, on stream `stream` of `seed`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum RegenStatus regen_trajectory_simulate(const struct RegenModel *model,
                                           double horizon,
                                           uint64_t seed,
                                           uint64_t stream,
                                           uint64_t max_cycles,
                                           struct RegenTrajectory **out);

/**
 * # Safety
 * `traj` must come from [`regen_trajectory_simulate`] and not be used again.
 */
void regen_trajectory_free(struct RegenTrajectory *traj);

/**
 * `N(t)`, the number of epochs in `(0, t]`.
 *
 * # Safety
 * `traj` must be a live handle; `out` must be writable.
 */
enum RegenStatus regen_trajectory_count(const struct RegenTrajectory *traj,
                                        double t,
                                        uint64_t *out);

/**
 * `Z(t)`.
 *
 * # Safety
 * `traj` must be a live handle; `out` must be writable.
 */
enum RegenStatus regen_trajectory_evaluate(const struct RegenTrajectory *traj,
                                           double t,
                                           double *out);

/**
 * Exact renewal function for `P(xi = (k + 1) span) = pmf[k]`, on
 * `0, span, ..., m_max span`.
 *
 * # Safety
 * `pmf` must point to `len` doubles; `out` must be writable.
 */
enum RegenStatus regen_renewal_arithmetic(const double *pmf,
                                          size_t len,
                                          double span,
                                          size_t m_max,
                                          struct RegenRenewalTable **out);

/**
 * Renewal function of the model's duration law on `[0, t_max]`: exact
 * for arithmetic models, discretized with step `h` otherwise.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum RegenStatus regen_renewal_for_model(const struct RegenModel *model,
                                         double h,
                                         double t_max,
                                         struct RegenRenewalTable **out);

/**
 * Number of grid points in the table.
 *
 * # Safety
 * `table` must be a live handle or null (yields 0).
 */
size_t regen_renewal_table_len(const struct RegenRenewalTable *table);

/**
 * `U(t)` read from the table.
 *
 * # Safety
 * `table` must be a live handle; `out` must be writable.
 */
enum RegenStatus regen_renewal_table_value(const struct RegenRenewalTable *table,
                                           double t,
                                           double *out);

/**
 * # Safety
 * `table` must come from a `regen_renewal_*` constructor and not be used again.
 */
void regen_renewal_table_free(struct RegenRenewalTable *table);

/**
 * Kolmogorov distance of `n` samples to `N(0, variance)` (point mass at 0
 * when `variance == 0`).
 *
 * # Safety
 * `samples` must point to `n` doubles; `out` must be writable.
 */
enum RegenStatus regen_ks_distance(const double *samples, size_t n, double variance, double *out);

/**
 * Runs an experiment config (TOML text) with `seed` and returns the JSON
 * report in `json_out` and 0 (all pass) or 1 (any fail) in `exit_code`.
 *
 * # Safety
 * `config` must be a valid NUL-terminated string; out pointers writable.
 */
enum RegenStatus regen_run_config(const char *config,
                                  uint64_t seed,
                                  int32_t *exit_code,
                                  char **json_out);

/**
 * # Safety
 * `s` must come from this library and not be used again.
 */
void regen_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REGEN_H */
