#ifndef ECG_ABCDE_H
#define ECG_ABCDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum EcgStatus {
  ECG_STATUS_OK = 0,
  ECG_STATUS_IO = 1,
  ECG_STATUS_PARSE = 2,
  ECG_STATUS_LEAD_COUNT = 3,
  ECG_STATUS_UNKNOWN_LEAD = 4,
  ECG_STATUS_DUPLICATE_LEAD = 5,
  ECG_STATUS_RAGGED_LEADS = 6,
  ECG_STATUS_NON_FINITE = 7,
  ECG_STATUS_INVALID_ARGUMENT = 8,
  ECG_STATUS_SIGNAL_TOO_SHORT = 9,
  ECG_STATUS_DEGENERATE = 10,
  ECG_STATUS_CODEBOOK_VERSION = 11,
  ECG_STATUS_INVALID_CODEBOOK = 12,
  ECG_STATUS_MALFORMED_LANGUAGE = 13,
  ECG_STATUS_OUTSIDE_ALPHABET = 14,
  ECG_STATUS_NON_CONVERGENCE = 15,
  ECG_STATUS_DUMP_MISMATCH = 16,
  // A required pointer argument was null.
  ECG_STATUS_NULL_POINTER = 17,
  // A string argument was not valid UTF-8.
  ECG_STATUS_INVALID_UTF8 = 18,
  // The library panicked; the message describes where.
  ECG_STATUS_PANIC = 19,
} EcgStatus;

// Opaque codebook handle.
typedef struct EcgCodebook EcgCodebook;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static nul-terminated string.
const char *ecg_version(void);

// Message of the last failed call on this thread, or null after a
// successful call. Valid until the next call into the library on the same
// thread.
const char *ecg_last_error_message(void);

// Loads a codebook JSON file.
//
// # Safety
// `path` must be a nul-terminated string and `out` a valid pointer.
enum EcgStatus ecg_codebook_load(const char *path, struct EcgCodebook **out);

// Parses a codebook from JSON text.
//
// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer.
enum EcgStatus ecg_codebook_from_json(const char *json, struct EcgCodebook **out);

// Serializes a codebook to JSON. Free the result with `ecg_string_free`.
//
// # Safety
// `cb` must come from this library and `out` be a valid pointer.
enum EcgStatus ecg_codebook_to_json(const struct EcgCodebook *cb, char **out);

// Releases a codebook. Null is ignored.
//
// # Safety
// `cb` must come from this library and not be used afterwards.
void ecg_codebook_free(struct EcgCodebook *cb);

// Encodes one lead sampled at the codebook's rate. A negative `lambda`
// selects the automatic smoothing policy. Free the result with
// `ecg_string_free`.
//
// # Safety
// `samples` must point to `len` doubles, `cb` come from this library and
// `out` be a valid pointer.
enum EcgStatus ecg_encode_lead(const struct EcgCodebook *cb,
                               const double *samples,
                               size_t len,
                               double lambda,
                               char **out);

// Decodes one lead. On success `*out` holds `*out_len` samples; free them
// with `ecg_samples_free`.
//
// # Safety
// `text` must be a nul-terminated string, `cb` come from this library and
// the out pointers be valid.
enum EcgStatus ecg_decode_lead(const struct EcgCodebook *cb,
                               const char *text,
                               double **out,
                               size_t *out_len);

// L1 trend filter of `y` with a fixed `lambda`, written to the caller's
// buffer `x` of the same length.
//
// # Safety
// `y` and `x` must each point to `len` doubles.
enum EcgStatus ecg_trend_filter(const double *y, size_t len, double lambda, double *x);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void ecg_string_free(char *s);

// Releases samples returned by `ecg_decode_lead`. Null is ignored.
//
// # Safety
// `p` and `len` must be exactly as returned and not used afterwards.
void ecg_samples_free(double *p, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECG_ABCDE_H */
