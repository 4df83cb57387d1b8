#ifndef COSAL_H
#define COSAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum CosalStatus {
  COSAL_STATUS_OK = 0,
  COSAL_STATUS_NULL_POINTER = 1,
  COSAL_STATUS_INVALID_ARGUMENT = 2,
  COSAL_STATUS_DIMENSION_MISMATCH = 3,
  COSAL_STATUS_EMPTY_GROUP = 4,
  COSAL_STATUS_OUT_OF_RANGE = 5,
  COSAL_STATUS_BUFFER_TOO_SMALL = 6,
  COSAL_STATUS_FAILED = 7,
  COSAL_STATUS_PANIC = 8,
} CosalStatus;

/**
 * An image group under construction. Opaque.
 */
typedef struct CosalGroup CosalGroup;

/**
 * Output maps of one run. Opaque.
 */
typedef struct CosalResult CosalResult;

/**
 * Pipeline parameters. Obtain defaults from [`cosal_config_default`].
 */
typedef struct CosalConfig {
  uint32_t n_superpixels;
  uint32_t k_roots;
  uint32_t kappa;
  uint32_t i_max;
  double t1;
  double t2;
  double sigma2;
  double zeta;
  double beta2;
  bool row_normalize;
} CosalConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *cosal_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cosal_version(void);

struct CosalConfig cosal_config_default(void);

struct CosalGroup *cosal_group_new(void);

/**
 * # Safety
 * `group` must be NULL or a pointer from [`cosal_group_new`] not yet freed.
 */
void cosal_group_free(struct CosalGroup *group);

/**
 * Number of images added so far; 0 for NULL.
 *
 * # Safety
 * `group` must be NULL or a live group handle.
 */
size_t cosal_group_len(const struct CosalGroup *group);

/**
 * Adds an image. `rgb` holds `width * height * 3` bytes, row-major RGB.
 * `depth` is NULL (RGB-only) or `width * height` raw depth values of any
 * finite range; they are min-max normalized. The new image index is written
 * to `out_index` when it is not NULL.
 *
 * # Safety
 * `group` must be a live group handle; `rgb` and a non-NULL `depth` must
 * point to buffers of the stated sizes.
 */
enum CosalStatus cosal_group_add_image(struct CosalGroup *group,
                                       const uint8_t *rgb,
                                       uint32_t width,
                                       uint32_t height,
                                       const double *depth,
                                       uint32_t *out_index);

/**
 * Adds one 8-bit input saliency map (`width * height` bytes, same size as
 * the image) to image `index` under the given method name.
 *
 * # Safety
 * `group` must be a live group handle, `method` a NUL-terminated string and
 * `map` a buffer of the image's pixel count.
 */
enum CosalStatus cosal_group_add_saliency(struct CosalGroup *group,
                                          uint32_t index,
                                          const char *method,
                                          const uint8_t *map);

/**
 * Runs the pipeline. `config` may be NULL for defaults. On success a new
 * result handle is written to `out`; release it with [`cosal_result_free`].
 *
 * # Safety
 * `group` must be a live group handle, `config` NULL or valid, `out` valid.
 */
enum CosalStatus cosal_run(const struct CosalGroup *group,
                           const struct CosalConfig *config,
                           struct CosalResult **out);

/**
 * # Safety
 * `result` must be NULL or a pointer from [`cosal_run`] not yet freed.
 */
void cosal_result_free(struct CosalResult *result);

/**
 * # Safety
 * `result` must be NULL or a live result handle.
 */
size_t cosal_result_len(const struct CosalResult *result);

/**
 * Copies the final map of image `index` as 8-bit grayscale into `buffer`,
 * which must hold at least `width * height` bytes (`capacity`).
 *
 * # Safety
 * `result` must be a live result handle and `buffer` writable for `capacity` bytes.
 */
enum CosalStatus cosal_result_copy_map(const struct CosalResult *result,
                                       uint32_t index,
                                       uint8_t *buffer,
                                       size_t capacity);

/**
 * Iterations run for image `index`, written to `out`.
 *
 * # Safety
 * `result` must be a live result handle and `out` valid.
 */
enum CosalStatus cosal_result_iterations(const struct CosalResult *result,
                                         uint32_t index,
                                         uint32_t *out);

/**
 * Weighted F-measure of a precision/recall pair.
 */
double cosal_f_measure(double precision, double recall, double beta2);

/**
 * ROC AUC of an 8-bit map against an 8-bit mask (foreground above 127).
 *
 * # Safety
 * `map` and `ground_truth` must each hold `width * height` bytes; `out` must be valid.
 */
enum CosalStatus cosal_auc(const uint8_t *map,
                           const uint8_t *ground_truth,
                           uint32_t width,
                           uint32_t height,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COSAL_H */
