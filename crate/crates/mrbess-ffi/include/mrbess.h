/* C interface of the mrbess sparse reduced-rank regression solver. */

#ifndef MRBESS_H
#define MRBESS_H

/* Generated by cbindgen from mrbess-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum MrbessStatus {
  MRBESS_STATUS_OK = 0,
  MRBESS_STATUS_NULL_POINTER = 1,
  MRBESS_STATUS_INVALID_ARGUMENT = 2,
  MRBESS_STATUS_DIMENSION_MISMATCH = 3,
  MRBESS_STATUS_NON_FINITE = 4,
  MRBESS_STATUS_SINGULAR_GRAM = 5,
  MRBESS_STATUS_TUNING_FAILED = 6,
  MRBESS_STATUS_PANIC = 7,
} MrbessStatus;

/**
 * How the active-set iteration terminated.
 */
typedef enum MrbessTermination {
  MRBESS_TERMINATION_TOL_CONVERGED = 0,
  MRBESS_TERMINATION_ACTIVE_SET_FIXED_POINT = 1,
  MRBESS_TERMINATION_CYCLE_DETECTED = 2,
  MRBESS_TERMINATION_MAX_ITER = 3,
} MrbessTermination;

/**
 * Opaque dataset handle.
 */
typedef struct MrbessDataset MrbessDataset;

/**
 * Opaque fit handle.
 */
typedef struct MrbessFit MrbessFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap` bytes). Returns the full message length excluding the
 * terminator, or 0 when no error is recorded.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be NULL (the call then only
 * reports the length).
 */
size_t mrbess_last_error_message(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mrbess_version(void);

/**
 * Build a dataset from row-major `x` (n x p) and `y` (n x q). Columns of
 * `x` are normalized internally; pass `center` to subtract column means
 * first. On success `*out` owns the dataset and must be released with
 * [`mrbess_dataset_free`].
 *
 * # Safety
 * `x` must point to `n * p` doubles, `y` to `n * q` doubles, `out` to a
 * writable pointer slot.
 */
enum MrbessStatus mrbess_dataset_create(const double *x,
                                        size_t n,
                                        size_t p,
                                        const double *y,
                                        size_t q,
                                        bool center,
                                        struct MrbessDataset **out);

/**
 * Release a dataset handle. NULL is ignored.
 *
 * # Safety
 * `dataset` must come from [`mrbess_dataset_create`] and not be freed twice.
 */
void mrbess_dataset_free(struct MrbessDataset *dataset);

/**
 * Fit at fixed rank and sparsity. `tol <= 0` and `max_iter == 0` select the
 * defaults (1e-5, 100). On success `*out` must be released with
 * [`mrbess_fit_free`].
 *
 * # Safety
 * `dataset` must be a live handle, `out` a writable pointer slot.
 */
enum MrbessStatus mrbess_fit_fixed(const struct MrbessDataset *dataset,
                                   size_t rank,
                                   size_t sparsity,
                                   double tol,
                                   size_t max_iter,
                                   struct MrbessFit **out);

/**
 * Tune (sparsity, rank) by the two-stage GIC coordinate search and return
 * the final fit.
 *
 * # Safety
 * `dataset` must be a live handle, `out` a writable pointer slot.
 */
enum MrbessStatus mrbess_tune_gic(const struct MrbessDataset *dataset,
                                  size_t s_max,
                                  size_t r_max,
                                  struct MrbessFit **out);

/**
 * Tune (sparsity, rank) on a seeded validation split and return the refit.
 *
 * # Safety
 * `dataset` must be a live handle, `out` a writable pointer slot.
 */
enum MrbessStatus mrbess_tune_validation(const struct MrbessDataset *dataset,
                                         size_t s_max,
                                         size_t r_max,
                                         double train_fraction,
                                         uint64_t seed,
                                         struct MrbessFit **out);

/**
 * Release a fit handle. NULL is ignored.
 *
 * # Safety
 * `fit` must come from a fitting function and not be freed twice.
 */
void mrbess_fit_free(struct MrbessFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
size_t mrbess_fit_rank(const struct MrbessFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
size_t mrbess_fit_sparsity(const struct MrbessFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
double mrbess_fit_loss(const struct MrbessFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
double mrbess_fit_gic(const struct MrbessFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
size_t mrbess_fit_iterations(const struct MrbessFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
bool mrbess_fit_converged(const struct MrbessFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
enum MrbessTermination mrbess_fit_status(const struct MrbessFit *fit);

/**
 * Copy the sorted 0-based active row indices into `out` (capacity `cap`).
 * `*written` receives the number of indices.
 *
 * # Safety
 * `out` must point to `cap` writable size_t slots, `written` to a writable
 * slot; `fit` must be a live handle.
 */
enum MrbessStatus mrbess_fit_active_set(const struct MrbessFit *fit,
                                        size_t *out,
                                        size_t cap,
                                        size_t *written);

/**
 * Copy the p x q coefficient matrix row-major into `out` (capacity `cap`
 * doubles). With `denormalized`, coefficients are rescaled to the original
 * column scaling of the design.
 *
 * # Safety
 * `out` must point to `cap` writable doubles; `fit` must be a live handle.
 */
enum MrbessStatus mrbess_fit_coefficients(const struct MrbessFit *fit,
                                          bool denormalized,
                                          double *out,
                                          size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MRBESS_H */
