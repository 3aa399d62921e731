#ifndef UNCAGG_H
#define UNCAGG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function of this interface.
 */
typedef enum UncaggStatus {
  UNCAGG_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  UNCAGG_STATUS_NULL_POINTER = 1,
  /**
   * An argument is malformed: bad strategy id, non-UTF-8 string, zero size.
   */
  UNCAGG_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A file could not be read.
   */
  UNCAGG_STATUS_IO = 3,
  /**
   * The input data violates a precondition (range, shape, model layout).
   */
  UNCAGG_STATUS_INVALID_DATA = 4,
  /**
   * The mask has no foreground pixels; the score is undefined.
   */
  UNCAGG_STATUS_NO_FOREGROUND = 5,
  /**
   * The strategy needs a segmentation mask and none was given.
   */
  UNCAGG_STATUS_MASK_REQUIRED = 6,
  /**
   * An internal panic was caught at the boundary.
   */
  UNCAGG_STATUS_PANIC = 7,
} UncaggStatus;

/**
 * Opaque uncertainty map.
 */
typedef struct UncaggMap UncaggMap;

/**
 * Opaque segmentation mask.
 */
typedef struct UncaggMask UncaggMask;

/**
 * Opaque fitted meta-aggregator.
 */
typedef struct UncaggModel UncaggModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread; empty after a
 * success. The pointer stays valid until the next call on the same thread.
 */
const char *uncagg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *uncagg_version(void);

/**
 * Copies a row-major `height × width` array of values in `[0, 1]`.
 *
 * # Safety
 * `values` must point to `height * width` readable doubles and `out` to a
 * writable handle slot. Release the handle with [`uncagg_map_free`].
 */
enum UncaggStatus uncagg_map_new(const double *values,
                                 uintptr_t height,
                                 uintptr_t width,
                                 struct UncaggMap **out);

/**
 * Loads a map from a two-dimensional NPY file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum UncaggStatus uncagg_map_load_npy(const char *path, struct UncaggMap **out);

/**
 * # Safety
 * `map` must be null or a handle from this library that was not yet freed.
 */
void uncagg_map_free(struct UncaggMap *map);

/**
 * Copies a row-major label mask; `background` is the label excluded from
 * class averages.
 *
 * # Safety
 * `labels` must point to `height * width` readable values and `out` to a
 * writable handle slot. Release the handle with [`uncagg_mask_free`].
 */
enum UncaggStatus uncagg_mask_new(const uint32_t *labels,
                                  uintptr_t height,
                                  uintptr_t width,
                                  uint32_t background,
                                  struct UncaggMask **out);

/**
 * # Safety
 * `mask` must be null or a handle from this library that was not yet freed.
 */
void uncagg_mask_free(struct UncaggMask *mask);

/**
 * Aggregates `map` with the strategy named by `strategy` (for example
 * `"avg"`, `"plm:20"`, `"eds"`). `mask` may be null for strategies that do
 * not use predictions.
 *
 * # Safety
 * Handles must be live, `strategy` NUL-terminated and `out` writable.
 */
enum UncaggStatus uncagg_aggregate(const struct UncaggMap *map,
                                   const struct UncaggMask *mask,
                                   const char *strategy,
                                   double *out);

/**
 * Loads a meta-aggregator saved as JSON.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` a writable handle slot. Release
 * the handle with [`uncagg_model_free`].
 */
enum UncaggStatus uncagg_model_load(const char *path, struct UncaggModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library that was not yet freed.
 */
void uncagg_model_free(struct UncaggModel *model);

/**
 * Number of features the model expects; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t uncagg_model_dim(const struct UncaggModel *model);

/**
 * Name of feature `index`, owned by the model handle; null when out of range.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
const char *uncagg_model_feature_name(const struct UncaggModel *model, uintptr_t index);

/**
 * Negative log-likelihood of a raw feature vector given in the model's
 * feature order.
 *
 * # Safety
 * `features` must point to `len` readable doubles and `out` be writable.
 */
enum UncaggStatus uncagg_model_score(const struct UncaggModel *model,
                                     const double *features,
                                     uintptr_t len,
                                     double *out);

/**
 * Computes the model's features from `map` (and `mask`, if needed) and
 * returns their negative log-likelihood.
 *
 * # Safety
 * Handles must be live (`mask` may be null) and `out` writable.
 */
enum UncaggStatus uncagg_model_score_map(const struct UncaggModel *model,
                                         const struct UncaggMap *map,
                                         const struct UncaggMask *mask,
                                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNCAGG_H */
