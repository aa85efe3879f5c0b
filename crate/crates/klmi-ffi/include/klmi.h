/* C interface to the klmi mutual information estimator. */

#ifndef KLMI_H
#define KLMI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum KlmiStatus {
  /**
   * Success.
   */
  KlmiOk = 0,
  /**
   * A required pointer argument was null.
   */
  KlmiNullPointer = 1,
  /**
   * An argument failed to parse or was structurally invalid.
   */
  KlmiInvalidArgument = 2,
  /**
   * An argument was outside the mathematical domain (bad h, empty
   * data, counts out of range).
   */
  KlmiDomainError = 3,
  /**
   * Input arrays had inconsistent dimensions.
   */
  KlmiShapeError = 4,
  /**
   * A distance matrix violated its invariants.
   */
  KlmiValidationError = 5,
  /**
   * Unexpected internal failure; see the last error message.
   */
  KlmiInternalError = 6,
} KlmiStatus;

/**
 * Opaque dataset handle. Create with `klmi_dataset_from_points` or
 * `klmi_dataset_from_matrix`, release with `klmi_dataset_free`.
 */
typedef struct KlmiDataset KlmiDataset;

/**
 * One estimate: sample size, number of classes, ball occupancy and the
 * naive / bias / corrected values in bits.
 */
typedef struct KlmiEstimate {
  uint64_t n;
  uint64_t n_x;
  uint32_t h;
  double i0_bits;
  double ib_bits;
  double ie_bits;
} KlmiEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on the calling thread. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *klmi_last_error_message(void);

/**
 * Static description of a status code.
 */
const char *klmi_status_name(enum KlmiStatus status);

/**
 * Build a dataset from `n` labels and an `n * dim` row-major feature
 * array under the named metric (`"euclidean"`, `"manhattan"`,
 * `"chebyshev"` or `"hamming"`). Labels may be arbitrary 32-bit class
 * ids; they are densified internally.
 *
 * # Safety
 * `labels` must point to `n` readable `uint32_t`, `features` to
 * `n * dim` readable doubles, `metric` to a NUL-terminated string, and
 * `out` to a writable pointer slot.
 */
enum KlmiStatus klmi_dataset_from_points(const uint32_t *labels,
                                         const double *features,
                                         size_t n,
                                         size_t dim,
                                         const char *metric,
                                         struct KlmiDataset **out);

/**
 * Build a dataset from `n` labels and an `n * n` row-major distance
 * matrix. The matrix must have a zero diagonal, be symmetric to 1e-9
 * relative tolerance, and contain only finite nonnegative entries.
 *
 * # Safety
 * `labels` must point to `n` readable `uint32_t`, `distances` to
 * `n * n` readable doubles, and `out` to a writable pointer slot.
 */
enum KlmiStatus klmi_dataset_from_matrix(const uint32_t *labels,
                                         const double *distances,
                                         size_t n,
                                         struct KlmiDataset **out);

/**
 * Release a dataset handle. Null is ignored.
 *
 * # Safety
 * `ds` must be null or a pointer previously returned by a dataset
 * constructor and not yet freed.
 */
void klmi_dataset_free(struct KlmiDataset *ds);

/**
 * Number of records in the dataset; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t klmi_dataset_size(const struct KlmiDataset *ds);

/**
 * Number of distinct classes in the dataset; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
uint64_t klmi_dataset_classes(const struct KlmiDataset *ds);

/**
 * Unbiased estimate at ball occupancy `h` (1 <= h <= n).
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` a writable struct slot.
 */
enum KlmiStatus klmi_estimate(const struct KlmiDataset *ds, uint32_t h, struct KlmiEstimate *out);

/**
 * Estimates for every `h` in `[h_min, h_max]`. `out` must hold
 * `h_max - h_min + 1` entries; `selected_h` receives the `h` with the
 * largest `ie_bits` (ties toward smaller `h`).
 *
 * # Safety
 * `ds` must be a live dataset handle, `out` writable for
 * `h_max - h_min + 1` entries, `selected_h` a writable slot.
 */
enum KlmiStatus klmi_sweep(const struct KlmiDataset *ds,
                           uint32_t h_min,
                           uint32_t h_max,
                           struct KlmiEstimate *out,
                           uint32_t *selected_h);

/**
 * Closed-form bias of the naive estimator for the given per-class
 * counts at ball occupancy `h`. Writes the bias in bits to `ib_bits`;
 * when `p_r` is non-null it receives the `h` probabilities
 * `P(h_y = r)`, `r = 1..h`.
 *
 * # Safety
 * `class_counts` must point to `n_classes` readable `uint64_t`,
 * `ib_bits` to a writable double, and `p_r` to either null or `h`
 * writable doubles.
 */
enum KlmiStatus klmi_bias(const uint64_t *class_counts,
                          size_t n_classes,
                          uint32_t h,
                          double *p_r,
                          double *ib_bits);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KLMI_H */
