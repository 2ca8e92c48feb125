/* C interface for the mwchart control chart library. */

#ifndef MWCHART_H
#define MWCHART_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes mirroring the CLI exit codes.
 */
typedef enum MwStatus {
  MwStatus_Ok = 0,
  MwStatus_NullPointer = 1,
  MwStatus_InvalidInput = 2,
  MwStatus_NumericError = 3,
  MwStatus_CapacityExceeded = 4,
} MwStatus;

/**
 * ARL engines selectable through the ABI.
 */
typedef enum MwArlMethod {
  MwArlMethod_Exact = 0,
  MwArlMethod_Lr = 1,
  MwArlMethod_Normal = 2,
  MwArlMethod_FixedReference = 3,
  MwArlMethod_FalseAlarm = 4,
} MwArlMethod;

/**
 * Opaque chart limits handle.
 */
typedef struct MwLimits MwLimits;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for this thread, or NULL when no error has occurred.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *mw_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mw_version(void);

/**
 * Mann-Whitney statistic of test sample y against reference sample x.
 *
 * # Safety
 * `x` must point to `m` readable doubles, `y` to `n` readable doubles, and
 * `out` to a writable double.
 */
enum MwStatus mw_statistic(const double *x,
                           uintptr_t m,
                           const double *y,
                           uintptr_t n,
                           bool midrank_ties,
                           double *out);

/**
 * Wrap explicit integer limits in a handle. Two-sided charts take
 * lcl = m*n - ucl automatically.
 *
 * # Safety
 * `out` must point to a writable pointer slot. The returned handle must be
 * released with `mw_limits_free`.
 */
enum MwStatus mw_limits_new(uintptr_t m,
                            uintptr_t n,
                            int64_t ucl,
                            bool one_sided,
                            double target_arl0,
                            struct MwLimits **out);

/**
 * Search integer limits for a target in-control ARL.
 *
 * `tolerance` is the relative stopping tolerance (0.02 is the usual value)
 * and `error_fraction` the Monte Carlo standard error target as a fraction
 * of the running estimate (0.015 is the usual value).
 *
 * # Safety
 * `out` must point to a writable pointer slot. The returned handle must be
 * released with `mw_limits_free`.
 */
enum MwStatus mw_design_limits(uintptr_t m,
                               uintptr_t n,
                               double target_arl0,
                               double tolerance,
                               double error_fraction,
                               bool one_sided,
                               uint64_t seed,
                               struct MwLimits **out);

/**
 * Upper control limit of a handle; i64::MIN for a null handle.
 *
 * # Safety
 * `limits` must be a live handle from this library or NULL.
 */
int64_t mw_limits_ucl(const struct MwLimits *limits);

/**
 * Lower control limit; -1 for one-sided charts, i64::MIN for a null handle.
 *
 * # Safety
 * `limits` must be a live handle from this library or NULL.
 */
int64_t mw_limits_lcl(const struct MwLimits *limits);

/**
 * Attained in-control ARL recorded by the design search; NaN when the
 * handle was built from explicit limits.
 *
 * # Safety
 * `limits` must be a live handle from this library or NULL.
 */
double mw_limits_attained_arl0(const struct MwLimits *limits);

/**
 * Release a limits handle. NULL is a no-op.
 *
 * # Safety
 * `limits` must be a handle from this library that has not been freed.
 */
void mw_limits_free(struct MwLimits *limits);

/**
 * In-control ARL of the limits by the chosen engine. `k` = 0 uses the
 * adaptive sample-size rule; otherwise exactly `k` Monte Carlo samples.
 * `out_smc` may be NULL. Deterministic methods report an smc of zero.
 *
 * # Safety
 * `limits` must be a live handle; `out_arl` must be writable; `out_smc`
 * must be writable or NULL.
 */
enum MwStatus mw_arl0(const struct MwLimits *limits,
                      enum MwArlMethod method,
                      uint64_t seed,
                      uintptr_t k,
                      double *out_arl,
                      double *out_smc);

/**
 * Run the chart: statistics and signal flags for `n_samples` test samples of
 * size `limits.n`, stored row-major in `tests`.
 *
 * # Safety
 * `limits` must be a live handle; `reference` must point to `m` doubles;
 * `tests` to `n_samples * n` doubles; `out_stats` and `out_signals` to
 * `n_samples` writable elements each.
 */
enum MwStatus mw_run_chart(const struct MwLimits *limits,
                           const double *reference,
                           uintptr_t m,
                           const double *tests,
                           uintptr_t n_samples,
                           bool midrank_ties,
                           double *out_stats,
                           uint8_t *out_signals);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MWCHART_H */
