#ifndef QRC_H
#define QRC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QrcStatus {
  QRC_STATUS_OK = 0,
  QRC_STATUS_NULL_POINTER = 1,
  QRC_STATUS_INVALID_ARGUMENT = 2,
  QRC_STATUS_DATA = 3,
  QRC_STATUS_NUMERICAL = 4,
  QRC_STATUS_IO = 5,
  QRC_STATUS_PANIC = 6,
} QrcStatus;

/*
 Feature matrix from a reservoir run, bias column included.
 */
typedef struct QrcFeatures QrcFeatures;

/*
 A configured quantum reservoir.
 */
typedef struct QrcReservoir QrcReservoir;

/*
 Trained readout weights, bias last.
 */
typedef struct QrcWeights QrcWeights;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *qrc_version(void);

/*
 Message of the last failure on this thread, or NULL. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *qrc_last_error_message(void);

/*
 Build a reservoir from a JSON config (same schema as the CLI's
 `reservoir` section); NULL `json` means all defaults.

 # Safety
 `json` must be NULL or a NUL-terminated string; `out` must be writable.
 */
enum QrcStatus qrc_reservoir_new(const char *json, struct QrcReservoir **out);

/*
 # Safety
 `reservoir` must be NULL or a handle from [`qrc_reservoir_new`] not yet freed.
 */
void qrc_reservoir_free(struct QrcReservoir *reservoir);

/*
 Qubit count of the reservoir, 0 for NULL.

 # Safety
 `reservoir` must be NULL or a live handle.
 */
size_t qrc_reservoir_qubits(const struct QrcReservoir *reservoir);

/*
 Drive the reservoir from `|0…0⟩` with `series` (values in [0, 1]) and
 return the post-washout features.

 # Safety
 `series` must point to `len` doubles; `out` must be writable.
 */
enum QrcStatus qrc_reservoir_run(const struct QrcReservoir *reservoir,
                                 const double *series,
                                 size_t len,
                                 struct QrcFeatures **out);

/*
 # Safety
 `features` must be NULL or a live handle.
 */
void qrc_features_free(struct QrcFeatures *features);

/*
 # Safety
 `features` must be NULL or a live handle.
 */
size_t qrc_features_rows(const struct QrcFeatures *features);

/*
 Columns including the trailing bias column.

 # Safety
 `features` must be NULL or a live handle.
 */
size_t qrc_features_cols(const struct QrcFeatures *features);

/*
 Copy the matrix row-major into `out` (`rows × cols` values).

 # Safety
 `out` must point to `len` writable doubles.
 */
enum QrcStatus qrc_features_copy(const struct QrcFeatures *features, double *out, size_t len);

/*
 Pseudoinverse readout mapping feature rows to `targets`.

 # Safety
 `targets` must point to `len` doubles; `out` must be writable.
 */
enum QrcStatus qrc_train_readout(const struct QrcFeatures *features,
                                 const double *targets,
                                 size_t len,
                                 struct QrcWeights **out);

/*
 # Safety
 `weights` must be NULL or a live handle.
 */
void qrc_weights_free(struct QrcWeights *weights);

/*
 # Safety
 `weights` must be NULL or a live handle.
 */
size_t qrc_weights_len(const struct QrcWeights *weights);

/*
 # Safety
 `out` must point to `len` writable doubles.
 */
enum QrcStatus qrc_weights_copy(const struct QrcWeights *weights, double *out, size_t len);

/*
 One prediction per feature row.

 # Safety
 `out` must point to `len` writable doubles, `len >= rows`.
 */
enum QrcStatus qrc_predict_open_loop(const struct QrcFeatures *features,
                                     const struct QrcWeights *weights,
                                     double *out,
                                     size_t len);

/*
 Hold out the last `horizon` points of `series`, train on the rest, and
 write open- and closed-loop forecasts (`horizon` values each) plus
 their MSEs. Any output pointer may be NULL to skip it.

 # Safety
 `series` must point to `len` doubles; non-NULL forecast buffers must hold
 `horizon` doubles.
 */
enum QrcStatus qrc_forecast(const struct QrcReservoir *reservoir,
                            const double *series,
                            size_t len,
                            size_t horizon,
                            double *open_loop,
                            double *closed_loop,
                            double *open_mse,
                            double *closed_mse);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QRC_H */
