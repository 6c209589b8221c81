#ifndef DETXPLAIN_H
#define DETXPLAIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DxDetectorKind {
  DX_DETECTOR_KIND_SYNTHETIC = 0,
  DX_DETECTOR_KIND_MINI_CNN = 1,
} DxDetectorKind;

typedef enum DxStatus {
  DX_STATUS_OK = 0,
  DX_STATUS_NULL_POINTER = 1,
  DX_STATUS_INVALID_ARGUMENT = 2,
  DX_STATUS_CONFIG = 3,
  DX_STATUS_DATA = 4,
  DX_STATUS_NUMERIC = 5,
  /**
   * A stage-2 method was asked to explain an image without detections.
   */
  DX_STATUS_NO_DETECTION = 6,
  DX_STATUS_BUFFER_TOO_SMALL = 7,
  DX_STATUS_PANIC = 8,
} DxStatus;

typedef struct DxDetector DxDetector;

typedef struct DxImage DxImage;

typedef struct DxSaliency DxSaliency;

/**
 * Half-open pixel box `[x1, x2) x [y1, y2)` with a score (ignored on input).
 */
typedef struct DxBox {
  uint32_t x1;
  uint32_t y1;
  uint32_t x2;
  uint32_t y2;
  double score;
} DxBox;

typedef struct DxPlausibility {
  double ebpg;
  double iou;
  double bbox;
} DxPlausibility;

/**
 * Library version as a static NUL-terminated string.
 */
const char *dx_version(void);

/**
 * Message of the last failed call on this thread, or NULL after a
 * successful call. Valid until the next `dx_*` call on this thread.
 */
const char *dx_last_error(void);

/**
 * Creates a detector for `height x width` images (multiples of 4),
 * otherwise at default settings.
 *
 * # Safety
 * `out` must be NULL or valid for writing one pointer.
 */
enum DxStatus dx_detector_new(enum DxDetectorKind kind,
                              size_t height,
                              size_t width,
                              struct DxDetector **out);

/**
 * # Safety
 * `det` must be NULL or a handle from [`dx_detector_new`] not yet freed.
 */
void dx_detector_free(struct DxDetector *det);

/**
 * Copies a row-major grayscale image with values in `[0, 1]`.
 *
 * # Safety
 * `data` must point to `height * width` readable doubles; `out` must be
 * valid for writing one pointer.
 */
enum DxStatus dx_image_new(size_t height, size_t width, const double *data, struct DxImage **out);

/**
 * # Safety
 * `img` must be NULL or a handle from [`dx_image_new`] not yet freed.
 */
void dx_image_free(struct DxImage *img);

/**
 * Image-level confidence (largest stage-2 score).
 *
 * # Safety
 * Handles must be live; `out` must be valid for writing.
 */
enum DxStatus dx_detector_score(const struct DxDetector *det,
                                const struct DxImage *img,
                                double *out);

/**
 * Final detections, best first. `*count` receives the number found;
 * when it exceeds `capacity` nothing is copied and
 * [`DxStatus::BufferTooSmall`] is returned.
 *
 * # Safety
 * `boxes` must be valid for writing `capacity` boxes (may be NULL when
 * `capacity` is 0); `count` must be valid for writing.
 */
enum DxStatus dx_detect(const struct DxDetector *det,
                        const struct DxImage *img,
                        struct DxBox *boxes,
                        size_t capacity,
                        size_t *count);

/**
 * Explains `img` with the named method (`gradcam`, `gradcampp`, `lrp`,
 * `adasise`, `rise`, `drise`, `lime`, `kde`, `dm`) at default parameters.
 * D-RISE explains the top detection.
 *
 * # Safety
 * Handles must be live; `method` must be a NUL-terminated string; `out`
 * must be valid for writing one pointer.
 */
enum DxStatus dx_explain(const struct DxDetector *det,
                         const struct DxImage *img,
                         const char *method,
                         uint64_t seed,
                         struct DxSaliency **out);

/**
 * # Safety
 * `s` must be a live saliency handle; `height` and `width` must be valid
 * for writing.
 */
enum DxStatus dx_saliency_dims(const struct DxSaliency *s, size_t *height, size_t *width);

/**
 * Row-major values owned by the handle; NULL when `s` is NULL. Valid
 * until [`dx_saliency_free`].
 *
 * # Safety
 * `s` must be NULL or a live saliency handle.
 */
const double *dx_saliency_values(const struct DxSaliency *s);

/**
 * # Safety
 * `s` must be NULL or a handle from [`dx_explain`] not yet freed.
 */
void dx_saliency_free(struct DxSaliency *s);

/**
 * EBPG, IoU and Bbox of a map against `n` ground-truth boxes (`n >= 1`).
 *
 * # Safety
 * `s` must be live; `gt` must point to `n` readable boxes; `out` must be
 * valid for writing.
 */
enum DxStatus dx_plausibility(const struct DxSaliency *s,
                              const struct DxBox *gt,
                              size_t n,
                              struct DxPlausibility *out);

/**
 * Drop (percent) and Increase of the detector when `s` weights the image.
 * Fails with [`DxStatus::InvalidArgument`] when the original score is 0.
 *
 * # Safety
 * Handles must be live; `drop_pct` and `increased` must be valid for
 * writing.
 */
enum DxStatus dx_drop_increase(const struct DxDetector *det,
                               const struct DxImage *img,
                               const struct DxSaliency *s,
                               double *drop_pct,
                               bool *increased);

#endif  /* DETXPLAIN_H */
