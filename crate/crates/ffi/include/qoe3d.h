#ifndef QOE3D_H
#define QOE3D_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum Qoe3dStatus {
  QOE3D_STATUS_OK = 0,
  QOE3D_STATUS_NULL_POINTER = 1,
  QOE3D_STATUS_INVALID_ARGUMENT = 2,
  QOE3D_STATUS_PARSE_ERROR = 3,
  QOE3D_STATUS_DEGENERATE_MODEL = 4,
  QOE3D_STATUS_INVALID_INPUT = 5,
  QOE3D_STATUS_SESSION_REJECTED = 6,
  QOE3D_STATUS_IO = 7,
  QOE3D_STATUS_PANIC = 99,
} Qoe3dStatus;

/**
 * A parsed model.
 */
typedef struct Qoe3dModel Qoe3dModel;

/**
 * A running participant session with its journal.
 */
typedef struct Qoe3dSession Qoe3dSession;

/**
 * Bytes owned by the library. `data[len]` is always a NUL byte, so JSON
 * results can be read as C strings.
 */
typedef struct Qoe3dBuffer {
  uint8_t *data;
  size_t len;
} Qoe3dBuffer;

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call on the same thread.
 */
const char *qoe3d_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qoe3d_version(void);

/**
 * Releases a buffer returned by the library. Passing a zeroed buffer is a
 * no-op.
 *
 * # Safety
 * `buf` must be null or point to a buffer filled in by this library that
 * has not been freed yet.
 */
void qoe3d_buffer_free(struct Qoe3dBuffer *buf);

/**
 * Parses PLY or OBJ bytes. `format` is 0 for auto-detection, 1 for PLY and
 * 2 for OBJ.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` to writable storage
 * for one handle.
 */
enum Qoe3dStatus qoe3d_model_parse(const uint8_t *data,
                                   size_t len,
                                   uint32_t format,
                                   struct Qoe3dModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`qoe3d_model_parse`].
 */
void qoe3d_model_free(struct Qoe3dModel *model);

/**
 * # Safety
 * `model` must be a live handle; the out pointers must be writable.
 */
enum Qoe3dStatus qoe3d_model_counts(const struct Qoe3dModel *model, size_t *points, size_t *faces);

/**
 * Axis-aligned bounds into `min[3]` and `max[3]`.
 *
 * # Safety
 * `model` must be a live handle; `min` and `max` must hold 3 doubles each.
 */
enum Qoe3dStatus qoe3d_model_bounds(const struct Qoe3dModel *model, double *min, double *max);

/**
 * Centers the model at the origin and scales its longest bounding-box edge
 * to 1, in place.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum Qoe3dStatus qoe3d_model_normalize(struct Qoe3dModel *model);

/**
 * Packed geometry bytes of the model.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum Qoe3dStatus qoe3d_model_pack(const struct Qoe3dModel *model, struct Qoe3dBuffer *out);

/**
 * Hex SHA-256 of the packed geometry, written to `out` as 64 characters
 * plus a NUL byte.
 *
 * # Safety
 * `model` must be a live handle and `out` must hold 65 bytes.
 */
enum Qoe3dStatus qoe3d_model_content_hash(const struct Qoe3dModel *model, char *out);

/**
 * Spearman rank-order correlation of two length-`n` vectors.
 *
 * # Safety
 * `a` and `b` must hold `n` doubles; `out` must be writable.
 */
enum Qoe3dStatus qoe3d_srocc(const double *a, const double *b, size_t n, double *out);

/**
 * Pearson linear correlation.
 *
 * # Safety
 * As for [`qoe3d_srocc`].
 */
enum Qoe3dStatus qoe3d_plcc(const double *a, const double *b, size_t n, double *out);

/**
 * Kendall rank correlation (tau-b).
 *
 * # Safety
 * As for [`qoe3d_srocc`].
 */
enum Qoe3dStatus qoe3d_krocc(const double *a, const double *b, size_t n, double *out);

/**
 * Root mean squared error.
 *
 * # Safety
 * As for [`qoe3d_srocc`].
 */
enum Qoe3dStatus qoe3d_rmse(const double *a, const double *b, size_t n, double *out);

/**
 * Applies the trap rule to one subject's `n` trap pairs. `rejected` is set
 * to 1 when any pair differs by more than 2.
 *
 * # Safety
 * `first` and `repeat` must hold `n` values; `rejected` must be writable.
 */
enum Qoe3dStatus qoe3d_screen_traps(const uint32_t *first,
                                    const uint32_t *repeat,
                                    size_t n,
                                    uint8_t *rejected);

/**
 * Builds the playlist for a manifest and config (both JSON) and returns it
 * as canonical JSON.
 *
 * # Safety
 * The strings must be NUL-terminated; `out` must be writable.
 */
enum Qoe3dStatus qoe3d_playlist_json(const char *manifest_json,
                                     const char *base_dir,
                                     const char *config_json,
                                     struct Qoe3dBuffer *out);

/**
 * Starts a session, or resumes it when the participant's journal exists.
 *
 * # Safety
 * The strings must be NUL-terminated; `out` must be writable.
 */
enum Qoe3dStatus qoe3d_session_open(const char *manifest_json,
                                    const char *base_dir,
                                    const char *config_json,
                                    struct Qoe3dSession **out);

/**
 * # Safety
 * `session` must be null or a handle from [`qoe3d_session_open`].
 */
void qoe3d_session_free(struct Qoe3dSession *session);

/**
 * Index of the next trial to judge, or -1 when the session is finished.
 * `total` receives the playlist length.
 *
 * # Safety
 * `session` must be a live handle; the out pointers must be writable.
 */
enum Qoe3dStatus qoe3d_session_progress(const struct Qoe3dSession *session,
                                        int64_t *next,
                                        uint32_t *total);

/**
 * Journals a judgment for the current trial.
 *
 * # Safety
 * `session` must be a live handle.
 */
enum Qoe3dStatus qoe3d_session_record(struct Qoe3dSession *session,
                                      uint32_t trial_index,
                                      uint32_t score,
                                      uint64_t view_time_ms);

#endif  /* QOE3D_H */
