/* SPDX-License-Identifier: MIT OR Apache-2.0 */

#ifndef DEPSMUCE_H
#define DEPSMUCE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DS_THRESHOLD_ALPHA 0

#define DS_THRESHOLD_Q 1

#define DS_LRV_BLOCK 0

#define DS_LRV_IID_DIFF 1

#define DS_LRV_FIXED 2

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_INPUT = 2,
  DS_STATUS_DEGENERATE = 3,
  DS_STATUS_INTERNAL = 4,
} DsStatus;

// Opaque fit handle.
typedef struct DsFit DsFit;

// Detector settings. Zero in `min_len`, `block_length` or `mc_reps` selects the default.
typedef struct DsDetectOptions {
  // `DS_THRESHOLD_ALPHA` or `DS_THRESHOLD_Q`.
  uint32_t threshold_kind;
  // Significance level or raw threshold, per `threshold_kind`.
  double threshold;
  size_t min_len;
  // `DS_LRV_BLOCK`, `DS_LRV_IID_DIFF` or `DS_LRV_FIXED`.
  uint32_t lrv_method;
  size_t block_length;
  // Used with `DS_LRV_FIXED`.
  double fixed_sigma;
  size_t mc_reps;
  uint64_t seed;
} DsDetectOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Defaults: alpha 0.5, block estimator, default scales and calibration.
struct DsDetectOptions ds_detect_options_default(void);

// Runs the detector on `y[0..n]` and stores a new handle in `*out`.
// A null `opts` uses [`ds_detect_options_default`].
//
// # Safety
// `y` must point to `n` readable doubles, `opts` must be null or valid and
// `out` must be writable.
enum DsStatus ds_detect(const double *y,
                        size_t n,
                        const struct DsDetectOptions *opts,
                        struct DsFit **out);

// # Safety
// `fit` must be null or a handle from [`ds_detect`] not yet freed.
void ds_fit_free(struct DsFit *fit);

// Number of change points, 0 for a null handle.
//
// # Safety
// `fit` must be null or a live handle.
size_t ds_fit_k_hat(const struct DsFit *fit);

// Copies up to `cap` break indices (1-based segment starts) into `buf` and
// returns the total count.
//
// # Safety
// `fit` must be null or a live handle; `buf` must hold `cap` values or be null with `cap == 0`.
size_t ds_fit_breaks(const struct DsFit *fit, size_t *buf, size_t cap);

// Copies up to `cap` segment levels into `buf` and returns the total count (`k_hat + 1`).
//
// # Safety
// As for [`ds_fit_breaks`].
size_t ds_fit_levels(const struct DsFit *fit, double *buf, size_t cap);

// Threshold used; NaN for a null handle.
//
// # Safety
// `fit` must be null or a live handle.
double ds_fit_q(const struct DsFit *fit);

// Noise scale used; NaN for a null handle.
//
// # Safety
// `fit` must be null or a live handle.
double ds_fit_sigma(const struct DsFit *fit);

// Residual sum of squares; NaN for a null handle.
//
// # Safety
// `fit` must be null or a live handle.
double ds_fit_sse(const struct DsFit *fit);

// The fit as a JSON object. Free the result with [`ds_string_free`]; null on a null handle.
//
// # Safety
// `fit` must be null or a live handle.
char *ds_fit_to_json(const struct DsFit *fit);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void ds_string_free(char *s);

// Block-difference long-run variance estimate; `block_length` 0 selects the default.
//
// # Safety
// `y` must point to `n` readable doubles and `out` must be writable.
enum DsStatus ds_block_diff_lrv(const double *y, size_t n, size_t block_length, double *out);

// Difference-based variance estimate for independent noise.
//
// # Safety
// `y` must point to `n` readable doubles and `out` must be writable.
enum DsStatus ds_iid_diff_lrv(const double *y, size_t n, double *out);

// Monte-Carlo `(1 - alpha)` quantile of the null multiscale statistic.
//
// # Safety
// `out` must be writable.
enum DsStatus ds_mc_quantile(size_t n,
                             size_t min_len,
                             double alpha,
                             size_t reps,
                             uint64_t seed,
                             double *out);

// Scale penalty for an interval of length `m` in a series of length `n`.
//
// # Safety
// `out` must be writable.
enum DsStatus ds_penalty(size_t m, size_t n, double *out);

// Message of the last failed call on this thread, or null. Valid until the
// next call into this library from the same thread.
const char *ds_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEPSMUCE_H */
