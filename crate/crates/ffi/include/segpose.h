#ifndef SEGPOSE_H
#define SEGPOSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SegposeStatus {
  SEGPOSE_STATUS_OK = 0,
  SEGPOSE_STATUS_NULL_POINTER = 1,
  SEGPOSE_STATUS_INVALID_ARGUMENT = 2,
  SEGPOSE_STATUS_EMPTY_INPUT = 3,
  SEGPOSE_STATUS_IO = 4,
  SEGPOSE_STATUS_PARSE = 5,
  SEGPOSE_STATUS_CONFIG = 6,
  SEGPOSE_STATUS_NUMERICAL = 7,
  SEGPOSE_STATUS_PANIC = 8,
  SEGPOSE_STATUS_OUT_OF_RANGE = 9,
} SegposeStatus;

typedef enum SegposeMode {
  SEGPOSE_MODE_ACQUISITION = 0,
  SEGPOSE_MODE_TRACKING = 1,
} SegposeMode;

typedef enum SegposeObjectStatus {
  SEGPOSE_OBJECT_STATUS_ACQUIRED = 0,
  SEGPOSE_OBJECT_STATUS_BELOW_THRESHOLD = 1,
  SEGPOSE_OBJECT_STATUS_TRACKED = 2,
  SEGPOSE_OBJECT_STATUS_REJECTED = 3,
  SEGPOSE_OBJECT_STATUS_OCCLUDED = 4,
  SEGPOSE_OBJECT_STATUS_LOST = 5,
  SEGPOSE_OBJECT_STATUS_FAILED = 6,
} SegposeObjectStatus;

/**
 * Opaque pose estimator.
 */
typedef struct SegposeEngine SegposeEngine;

/**
 * Opaque per-frame result.
 */
typedef struct SegposeFrameResult SegposeFrameResult;

/**
 * Pinhole parameters in pixels.
 */
typedef struct SegposeIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
  uint32_t width;
  uint32_t height;
} SegposeIntrinsics;

/**
 * One object's outcome for a frame. `pose` is `qw qx qy qz tx ty tz`,
 * model to camera, valid when `has_pose` is nonzero. `crop_id` is -1 when no
 * crop applies; `position_variance` is NaN outside tracking.
 */
typedef struct SegposeObjectPose {
  uint8_t class_id;
  enum SegposeMode mode;
  enum SegposeObjectStatus status;
  int64_t crop_id;
  int32_t has_pose;
  double pose[7];
  double score;
  double position_variance;
} SegposeObjectPose;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty after success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *segpose_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *segpose_version(void);

/**
 * Fraction of `candidate` points with a `scene` point within `tau` meters.
 *
 * # Safety
 * `candidate` and `scene` must point to `3 * count` doubles; `out_score`
 * must be writable.
 */
enum SegposeStatus segpose_alignment_score(const double *candidate,
                                           size_t candidate_count,
                                           const double *scene,
                                           size_t scene_count,
                                           double tau,
                                           double *out_score);

/**
 * Creates an engine. `config_path` may be null for default parameters and
 * no objects; otherwise it is read for `[pipeline]`, `[crops]` and
 * `[object]` sections exactly like the command-line `run` config.
 *
 * # Safety
 * `intrinsics` and `out_engine` must be valid pointers; `config_path` null
 * or a NUL-terminated string.
 */
enum SegposeStatus segpose_engine_new(const char *config_path,
                                      const struct SegposeIntrinsics *intrinsics,
                                      struct SegposeEngine **out_engine);

/**
 * Loads a mesh (OBJ or PLY, meters) for `class_id` and builds its crops.
 * With a non-null `cache_dir` the crops are read from or written to it.
 *
 * # Safety
 * `engine` must come from [`segpose_engine_new`]; strings NUL-terminated.
 */
enum SegposeStatus segpose_engine_add_mesh(struct SegposeEngine *engine,
                                           const char *mesh_path,
                                           uint8_t class_id,
                                           const char *cache_dir);

/**
 * Forgets all tracking state; objects return to acquisition.
 *
 * # Safety
 * `engine` must come from [`segpose_engine_new`].
 */
enum SegposeStatus segpose_engine_reset(struct SegposeEngine *engine);

/**
 * Processes one frame. `depth` holds `width * height` meters (0 or NaN for
 * no reading), `labels` the matching class ids. `camera_motion` is the
 * current camera pose in the previous camera frame (`qw qx qy qz tx ty tz`)
 * or null for a static camera; `dt` is the time since the previous frame.
 *
 * # Safety
 * Buffers must have the stated sizes; `out_result` must be writable.
 */
enum SegposeStatus segpose_engine_process_frame(struct SegposeEngine *engine,
                                                const float *depth,
                                                const uint8_t *labels,
                                                uint32_t width,
                                                uint32_t height,
                                                const double *camera_motion,
                                                double dt,
                                                struct SegposeFrameResult **out_result);

/**
 * Number of objects reported in `result`; 0 for null.
 *
 * # Safety
 * `result` must be null or come from [`segpose_engine_process_frame`].
 */
size_t segpose_result_count(const struct SegposeFrameResult *result);

/**
 * Copies the `index`-th object of `result` into `out`.
 *
 * # Safety
 * `result` must come from [`segpose_engine_process_frame`]; `out` writable.
 */
enum SegposeStatus segpose_result_object(const struct SegposeFrameResult *result,
                                         size_t index,
                                         struct SegposeObjectPose *out);

/**
 * # Safety
 * `result` must be null or come from [`segpose_engine_process_frame`] and
 * not have been freed.
 */
void segpose_result_free(struct SegposeFrameResult *result);

/**
 * # Safety
 * `engine` must be null or come from [`segpose_engine_new`] and not have
 * been freed.
 */
void segpose_engine_free(struct SegposeEngine *engine);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEGPOSE_H */
