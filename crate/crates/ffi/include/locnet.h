#ifndef LOCNET_H
#define LOCNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum LocnetStatus {
  LOCNET_STATUS_OK = 0,
  LOCNET_STATUS_INVALID_ARGUMENT = 1,
  LOCNET_STATUS_CONFIG = 2,
  LOCNET_STATUS_SHAPE = 3,
  LOCNET_STATUS_FORMAT = 4,
  LOCNET_STATUS_NUMERIC = 5,
  LOCNET_STATUS_IO = 6,
  LOCNET_STATUS_NULL_POINTER = 7,
  LOCNET_STATUS_PANIC = 8,
} LocnetStatus;

/*
 Encoded dataset.
 */
typedef struct LocnetDataset LocnetDataset;

/*
 Trained model with the encoding it expects.
 */
typedef struct LocnetModel LocnetModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *locnet_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *locnet_version(void);

/*
 InF path loss in dB for a 3-D distance in metres and a carrier in GHz.

 # Safety
 `out_db` must be null or point to writable memory for one `double`.
 */
enum LocnetStatus locnet_path_loss_db(double d_3d_m, double carrier_ghz, double *out_db);

/*
 Simulates `n_samples` UEs on the laptop-scale layout (8 TRPs, 64 taps)
 with every TRP present and clean labels. `encoding` is 0 (CIR),
 1 (CIR+RSRP) or 2 (CIR+RSRP+ratio).

 # Safety
 `out` must be null or point to writable memory for one pointer.
 */
enum LocnetStatus locnet_dataset_generate(uint8_t encoding,
                                          size_t n_samples,
                                          uint64_t seed,
                                          struct LocnetDataset **out);

/*
 # Safety
 `path` must be a NUL-terminated string; `out` must point to writable
 memory for one pointer.
 */
enum LocnetStatus locnet_dataset_load(const char *path, struct LocnetDataset **out);

/*
 # Safety
 `ds` must come from this library and not be freed; `path` must be a
 NUL-terminated string.
 */
enum LocnetStatus locnet_dataset_save(const struct LocnetDataset *ds, const char *path);

/*
 Sample count and `[rows, taps, channels]` of one sample.

 # Safety
 `ds` must be a live dataset handle; `out_len` must be writable and
 `out_dims` must point to three writable `size_t`.
 */
enum LocnetStatus locnet_dataset_shape(const struct LocnetDataset *ds,
                                       size_t *out_len,
                                       size_t *out_dims);

/*
 Releases a dataset; null is ignored.

 # Safety
 `ds` must be null or a handle from this library that was not freed yet.
 */
void locnet_dataset_free(struct LocnetDataset *ds);

/*
 Loads a checkpoint written by the training tool.

 # Safety
 `path` must be a NUL-terminated string; `out` must point to writable
 memory for one pointer.
 */
enum LocnetStatus locnet_model_load(const char *path, struct LocnetModel **out);

/*
 # Safety
 `model` must be a live model handle; `out` must be writable.
 */
enum LocnetStatus locnet_model_param_count(const struct LocnetModel *model, size_t *out);

/*
 Writes `(x, y)` per sample into `out_xy`, which must hold
 `2 * capacity_samples` doubles.

 # Safety
 `model` and `ds` must be live handles; `out_xy` must point to
 `2 * capacity_samples` writable doubles.
 */
enum LocnetStatus locnet_model_predict(struct LocnetModel *model,
                                       const struct LocnetDataset *ds,
                                       double *out_xy,
                                       size_t capacity_samples);

/*
 90th-percentile horizontal error in metres. `clean_labels` non-zero
 scores against the noise-free positions.

 # Safety
 `model` and `ds` must be live handles; `out_p90_m` must be writable.
 */
enum LocnetStatus locnet_model_p90(struct LocnetModel *model,
                                   const struct LocnetDataset *ds,
                                   int32_t clean_labels,
                                   double *out_p90_m);

/*
 Releases a model; null is ignored.

 # Safety
 `model` must be null or a handle from this library that was not freed yet.
 */
void locnet_model_free(struct LocnetModel *model);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* LOCNET_H */
