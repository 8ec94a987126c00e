#ifndef PHANTOMGEN_H
#define PHANTOMGEN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Feature ids accepted by [`pg_feature_curve`].
 */
#define PG_FEATURE_AREA 0

#define PG_FEATURE_ROUNDNESS 1

#define PG_FEATURE_ELONGATION 2

#define PG_FEATURE_CONVEXITY 3

/**
 * Status codes returned by every fallible function.
 */
typedef enum PgStatus {
  PgOk = 0,
  PgErrNullArgument = 1,
  PgErrInvalidArgument = 2,
  PgErrUtf8 = 3,
  PgErrIo = 4,
  PgErrGeometry = 5,
  PgErrEfd = 6,
  PgErrDiffusion = 7,
  PgErrMetrics = 8,
  PgErrPanic = 9,
} PgStatus;

/**
 * EFD coefficient series handle (4d channels by T frames).
 */
typedef struct PgEfdSeries PgEfdSeries;

/**
 * Mask video handle (sequence of equally sized binary frames).
 */
typedef struct PgMaskVideo PgMaskVideo;

/**
 * Trained generator handle: denoiser weights plus the normalization and
 * geometry needed to emit mask videos.
 */
typedef struct PgModel PgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent error on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *pg_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *pg_version(void);

/**
 * Loads an MVB1 container.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PgStatus pg_mask_video_load(const char *path, struct PgMaskVideo **out);

/**
 * Saves an MVB1 container.
 *
 * # Safety
 * `video` must be a live handle and `path` a NUL-terminated string.
 */
enum PgStatus pg_mask_video_save(const struct PgMaskVideo *video, const char *path);

/**
 * Builds a video from `t * h * w` bytes (0 or 1), frame-major, row-major.
 *
 * # Safety
 * `bits` must point to at least `t * h * w` bytes; `out` must be valid.
 */
enum PgStatus pg_mask_video_from_bits(uint32_t t,
                                      uint32_t h,
                                      uint32_t w,
                                      const uint8_t *bits,
                                      struct PgMaskVideo **out);

/**
 * Frame count; 0 when the handle is null.
 *
 * # Safety
 * `video` must be null or a live handle.
 */
uint32_t pg_mask_video_frames(const struct PgMaskVideo *video);

/**
 * # Safety
 * `video` must be null or a live handle.
 */
uint32_t pg_mask_video_width(const struct PgMaskVideo *video);

/**
 * # Safety
 * `video` must be null or a live handle.
 */
uint32_t pg_mask_video_height(const struct PgMaskVideo *video);

/**
 * Copies one frame's bytes (row-major, 0/1) into `buf` of length `len`.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes.
 */
enum PgStatus pg_mask_video_frame_bits(const struct PgMaskVideo *video,
                                       uint32_t index,
                                       uint8_t *buf,
                                       uintptr_t len);

/**
 * # Safety
 * `video` must be null or an owned handle; it is invalid afterwards.
 */
void pg_mask_video_free(struct PgMaskVideo *video);

/**
 * Encodes a mask video at harmonic order `d` with `n_points` resampled
 * contour points per frame.
 *
 * # Safety
 * `video` must be a live handle and `out` a valid pointer.
 */
enum PgStatus pg_encode_video(const struct PgMaskVideo *video,
                              uintptr_t d,
                              uintptr_t n_points,
                              struct PgEfdSeries **out);

/**
 * # Safety
 * `series` must be null or a live handle.
 */
uint32_t pg_series_channels(const struct PgEfdSeries *series);

/**
 * # Safety
 * `series` must be null or a live handle.
 */
uint32_t pg_series_len(const struct PgEfdSeries *series);

/**
 * Copies the row-major channels x T coefficient matrix into `buf`.
 *
 * # Safety
 * `buf` must point to at least `len` writable doubles.
 */
enum PgStatus pg_series_values(const struct PgEfdSeries *series, double *buf, uintptr_t len);

/**
 * Builds a series from a row-major channels x T matrix with channels = 4d.
 *
 * # Safety
 * `values` must point to at least `4 * d * t` doubles.
 */
enum PgStatus pg_series_from_values(uintptr_t d,
                                    uintptr_t t,
                                    const double *values,
                                    struct PgEfdSeries **out);

/**
 * Decodes, centers on an h x w canvas, rasterizes, and cleans up topology.
 *
 * # Safety
 * `series` must be a live handle and `out` a valid pointer.
 */
enum PgStatus pg_series_to_video(const struct PgEfdSeries *series,
                                 uint32_t h,
                                 uint32_t w,
                                 uintptr_t n_points,
                                 struct PgMaskVideo **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `series` a live handle.
 */
enum PgStatus pg_series_save_csv(const struct PgEfdSeries *series, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PgStatus pg_series_load_csv(const char *path, struct PgEfdSeries **out);

/**
 * # Safety
 * `series` must be null or an owned handle; it is invalid afterwards.
 */
void pg_series_free(struct PgEfdSeries *series);

/**
 * Loads an EFDM checkpoint with its embedded normalization stats.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PgStatus pg_model_load(const char *path, struct PgModel **out);

/**
 * # Safety
 * `model` must be null or a live handle.
 */
uint32_t pg_model_channels(const struct PgModel *model);

/**
 * # Safety
 * `model` must be null or a live handle.
 */
uint32_t pg_model_seq_len(const struct PgModel *model);

/**
 * Samples one EFD series (denormalized, pixel units). `t_len` 0 uses the
 * training length.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PgStatus pg_model_sample_series(const struct PgModel *model,
                                     uintptr_t t_len,
                                     uint64_t seed,
                                     struct PgEfdSeries **out);

/**
 * Samples one phantom mask video (sample, denormalize, decode, rasterize).
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PgStatus pg_model_generate_video(const struct PgModel *model,
                                      uintptr_t t_len,
                                      uint64_t seed,
                                      struct PgMaskVideo **out);

/**
 * # Safety
 * `model` must be null or an owned handle; it is invalid afterwards.
 */
void pg_model_free(struct PgModel *model);

/**
 * Normalized DTW distance between two curves.
 *
 * # Safety
 * `x` and `y` must point to `x_len` / `y_len` doubles; `out` must be valid.
 */
enum PgStatus pg_dtw_distance(const double *x,
                              uintptr_t x_len,
                              const double *y,
                              uintptr_t y_len,
                              double *out);

/**
 * Writes one morphological feature curve (length = frame count) into `buf`;
 * frames that fail the phantom predicate yield NaN.
 *
 * # Safety
 * `buf` must point to at least `len` writable doubles.
 */
enum PgStatus pg_feature_curve(const struct PgMaskVideo *video,
                               uint32_t feature,
                               double *buf,
                               uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHANTOMGEN_H */
