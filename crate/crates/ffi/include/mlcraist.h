#ifndef MLCRAIST_H
#define MLCRAIST_H

/* Generated by cbindgen; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Feature fusion used for the high-frequency bands.
 */
typedef enum MlcrAfbMode {
  MLCR_AFB_MODE_ATTENTION = 0,
  MLCR_AFB_MODE_ADD = 1,
  MLCR_AFB_MODE_CONCAT = 2,
} MlcrAfbMode;

typedef enum MlcrStatus {
  MLCR_STATUS_OK = 0,
  MLCR_STATUS_NULL_POINTER = 1,
  MLCR_STATUS_INVALID_ARGUMENT = 2,
  MLCR_STATUS_CONFIG = 3,
  MLCR_STATUS_NON_FINITE = 4,
  MLCR_STATUS_FORMAT = 5,
  MLCR_STATUS_IO = 6,
  MLCR_STATUS_PANIC = 7,
} MlcrStatus;

/**
 * Opaque model handle.
 */
typedef struct MlcrModel MlcrModel;

typedef struct MlcrConfig {
  uint32_t scale;
  uint32_t width;
  uint32_t n_scatb;
  uint32_t heads;
  uint32_t window;
  uint32_t dwt_levels;
  /**
   * One of the [`MlcrAfbMode`] values.
   */
  uint32_t afb_mode;
  bool use_cab;
  bool use_lhfib;
} MlcrConfig;

typedef struct MlcrScores {
  double psnr_y;
  double ssim_y;
  double epi;
} MlcrScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty after a
 * success. Valid until the next call on this thread.
 */
const char *mlcr_last_error_message(void);

/**
 * The default 64-channel configuration for `scale`.
 *
 * # Safety
 * `out` must point to writable memory for one `MlcrConfig`.
 */
enum MlcrStatus mlcr_config_default(uint32_t scale, struct MlcrConfig *out);

/**
 * Create a freshly initialized model. Free it with [`mlcr_model_free`].
 *
 * # Safety
 * `config` must be readable and `out` writable.
 */
enum MlcrStatus mlcr_model_new(const struct MlcrConfig *config,
                               uint64_t seed,
                               struct MlcrModel **out);

/**
 * Load a checkpoint. Free the result with [`mlcr_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum MlcrStatus mlcr_model_load(const char *path, struct MlcrModel **out);

/**
 * # Safety
 * `model` must come from this library; `path` must be NUL-terminated.
 */
enum MlcrStatus mlcr_model_save(const struct MlcrModel *model, const char *path);

/**
 * Release a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void mlcr_model_free(struct MlcrModel *model);

/**
 * # Safety
 * `model` must come from this library; `out` must be writable.
 */
enum MlcrStatus mlcr_model_config(const struct MlcrModel *model, struct MlcrConfig *out);

/**
 * # Safety
 * `model` must come from this library; `out` must be writable.
 */
enum MlcrStatus mlcr_model_param_count(const struct MlcrModel *model, uint64_t *out);

/**
 * # Safety
 * `model` must come from this library; `out` must be writable.
 */
enum MlcrStatus mlcr_model_scale(const struct MlcrModel *model, uint32_t *out);

/**
 * Upscale `batch` RGB images of `height` x `width`. `output` must hold
 * exactly `batch * 3 * (s * height) * (s * width)` values.
 *
 * # Safety
 * Buffers must be valid for the stated sizes.
 */
enum MlcrStatus mlcr_upscale(const struct MlcrModel *model,
                             const float *input,
                             size_t batch,
                             size_t height,
                             size_t width,
                             float *output,
                             size_t output_len);

/**
 * Bicubic resampling of `(batch, channels, height, width)` to
 * `out_height` x `out_width`.
 *
 * # Safety
 * Buffers must be valid for the stated sizes.
 */
enum MlcrStatus mlcr_bicubic_resize(const float *input,
                                    size_t batch,
                                    size_t channels,
                                    size_t height,
                                    size_t width,
                                    size_t out_height,
                                    size_t out_width,
                                    float *output,
                                    size_t output_len);

/**
 * One level of the orthonormal Haar transform. `height` and `width` must
 * be even; each band buffer holds `batch * channels * height/2 * width/2`
 * values.
 *
 * # Safety
 * Buffers must be valid for the stated sizes.
 */
enum MlcrStatus mlcr_dwt2_haar(const float *input,
                               size_t batch,
                               size_t channels,
                               size_t height,
                               size_t width,
                               float *ll,
                               float *lh,
                               float *hl,
                               float *hh);

/**
 * Inverse of [`mlcr_dwt2_haar`]; `height` and `width` are the band sizes
 * and `output` holds `batch * channels * 2height * 2width` values.
 *
 * # Safety
 * Buffers must be valid for the stated sizes.
 */
enum MlcrStatus mlcr_idwt2_haar(const float *ll,
                                const float *lh,
                                const float *hl,
                                const float *hh,
                                size_t batch,
                                size_t channels,
                                size_t height,
                                size_t width,
                                float *output,
                                size_t output_len);

/**
 * PSNR in dB (peak 1) over all values; identical inputs give +infinity.
 *
 * # Safety
 * `a` and `b` must each hold `batch * channels * height * width` values.
 */
enum MlcrStatus mlcr_psnr(const float *a,
                          const float *b,
                          size_t batch,
                          size_t channels,
                          size_t height,
                          size_t width,
                          double *out);

/**
 * Mean SSIM over every plane; planes must be at least 11x11.
 *
 * # Safety
 * `a` and `b` must each hold `batch * channels * height * width` values.
 */
enum MlcrStatus mlcr_ssim(const float *a,
                          const float *b,
                          size_t batch,
                          size_t channels,
                          size_t height,
                          size_t width,
                          double *out);

/**
 * Luma PSNR, SSIM and edge index of RGB `sr` against `gt` after removing
 * `border` pixels from each side.
 *
 * # Safety
 * `sr` and `gt` must each hold `batch * 3 * height * width` values.
 */
enum MlcrStatus mlcr_evaluate(const float *sr,
                              const float *gt,
                              size_t batch,
                              size_t height,
                              size_t width,
                              size_t border,
                              struct MlcrScores *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mlcr_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MLCRAIST_H */
