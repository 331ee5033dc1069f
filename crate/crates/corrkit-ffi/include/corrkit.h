#ifndef CORRKIT_H
#define CORRKIT_H

/* Generated by cbindgen from corrkit-ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  CK_STATUS_OK = 0,
  CK_STATUS_NULL_POINTER = 1,
  CK_STATUS_INVALID_PARAMETER = 2,
  CK_STATUS_DOMAIN = 3,
  CK_STATUS_LENGTH_MISMATCH = 4,
  CK_STATUS_NUMERIC = 5,
  CK_STATUS_IO = 6,
  CK_STATUS_PARSE = 7,
  CK_STATUS_SPEC_MISMATCH = 8,
  CK_STATUS_VERSION = 9,
  CK_STATUS_PANIC = 10,
} CkStatus;

/**
 * Opaque calibrated inverse map.
 */
typedef struct CkModel CkModel;

/**
 * Opaque correlator descriptor.
 */
typedef struct CkSpec CkSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length including the NUL,
 * or 0 when no error has been recorded.
 */
size_t ck_last_error_message(char *buf, size_t len);

/**
 * Parses a descriptor such as `"l1"`, `"mp:gamma=1.45"` or
 * `"mix:w=0.5,0.5;alpha=0,2"`.
 */
CkStatus ck_spec_parse(const char *descriptor, CkSpec **out);

void ck_spec_free(CkSpec *spec);

/**
 * Single-pair score `f(x, y)`.
 */
CkStatus ck_correlator_f(const CkSpec *spec, double x, double y, double *out);

/**
 * Mean score over `len` pairs.
 */
CkStatus ck_batch_score(const CkSpec *spec,
                        const double *xs,
                        const double *ys,
                        size_t len,
                        double *out);

/**
 * Expected output `g(R)` of the mixture with `len` terms under Gaussian inputs.
 */
CkStatus ck_g_of_r(const double *weights, const double *offsets, size_t len, double r, double *out);

/**
 * Slope `dg/dR` of the mixture's expected output.
 */
CkStatus ck_dg_dr(const double *weights, const double *offsets, size_t len, double r, double *out);

CkStatus ck_g_l1_closed(double r, double *out);

/**
 * In-place normalized Walsh–Hadamard transform; `len` must be a power of two.
 */
CkStatus ck_fwht(double *data, size_t len);

CkStatus ck_fisher_info(double r, double *out);

CkStatus ck_crb_sigma(double r, size_t n, double *out);

/**
 * Calibrates `spec` on Gaussian inputs with the default grid, batch size,
 * trial count and degree.
 */
CkStatus ck_model_calibrate(const CkSpec *spec, uint64_t seed, bool use_wht, CkModel **out);

CkStatus ck_model_load(const char *path, CkModel **out);

CkStatus ck_model_save(const CkModel *model, const char *path);

void ck_model_free(CkModel *model);

/**
 * Maps a raw score to a correlation in `[-1, 1]`.
 */
CkStatus ck_model_invert(const CkModel *model, double y, double *out);

/**
 * Correlation estimate for `len` pairs. Fails with
 * `CK_STATUS_SPEC_MISMATCH` if the model was calibrated for another spec.
 */
CkStatus ck_estimate_r(const CkModel *model,
                       const CkSpec *spec,
                       const double *xs,
                       const double *ys,
                       size_t len,
                       bool use_wht,
                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CORRKIT_H */
