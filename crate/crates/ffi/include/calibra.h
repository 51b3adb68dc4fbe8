#ifndef CALIBRA_H
#define CALIBRA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum CalibraStatus {
  CALIBRA_STATUS_OK = 0,
  // A required pointer was null.
  CALIBRA_STATUS_NULL_POINTER = 1,
  // Malformed JSON, invalid procedure or domain, non-UTF-8 text.
  CALIBRA_STATUS_INVALID_CONFIG = 2,
  // The outgoing solver or the minimax program failed.
  CALIBRA_STATUS_SOLVER_FAILURE = 3,
  // A buffer length differs from the engine dimension.
  CALIBRA_STATUS_DIMENSION_MISMATCH = 4,
  // Bad numeric input: non-finite values, points outside the domain.
  CALIBRA_STATUS_INVALID_ARGUMENT = 5,
  // Calls out of order, e.g. observe without a pending forecast.
  CALIBRA_STATUS_INVALID_STATE = 6,
  // Scores requested before the first observation.
  CALIBRA_STATUS_EMPTY_HISTORY = 7,
  // A Rust panic was caught at the boundary.
  CALIBRA_STATUS_PANIC = 8,
} CalibraStatus;

// Opaque engine handle.
typedef struct CalibraEngine CalibraEngine;

// Scores after the periods observed so far.
typedef struct CalibraScores {
  uint64_t t;
  // Classic score K_t.
  double k_classic;
  // Binned score K_t^Π under the engine's binning.
  double k_binned;
  // Σ_i ‖g_t(w_i)‖², i.e. S_t/t².
  double s_over_t2;
  // X_t/t.
  double x_over_t;
} CalibraScores;

// Certificate of the most recent announcement.
typedef struct CalibraDiagnostics {
  double violation;
  // 1 when the certificate met its tolerance.
  uint8_t satisfied;
  // Support size of the announced distribution.
  uint64_t support;
} CalibraDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates an engine. `domain_json` may be null for the interval [0,1].
//
// # Safety
// `procedure_json` must be a nul-terminated string, `domain_json` null or
// nul-terminated, and `out` a valid pointer. On success `*out` owns a handle
// to release with `calibra_engine_free`; on failure it is set to null.
enum CalibraStatus calibra_engine_new(const char *procedure_json,
                                      const char *domain_json,
                                      uint64_t seed,
                                      struct CalibraEngine **out);

// Releases an engine; null is ignored.
//
// # Safety
// `engine` is null or a handle from `calibra_engine_new` not yet freed.
void calibra_engine_free(struct CalibraEngine *engine);

// Dimension m of forecasts and actions; 0 for a null handle.
//
// # Safety
// `engine` is null or a live handle.
size_t calibra_engine_dimension(const struct CalibraEngine *engine);

// Announces and samples the next forecast into `out[0..len]`.
//
// Calling it again before `calibra_engine_observe` returns the same pending
// forecast without advancing the generator.
//
// # Safety
// `engine` is a live handle and `out` points to `len` writable doubles.
enum CalibraStatus calibra_engine_next_forecast(struct CalibraEngine *engine,
                                                double *out,
                                                size_t len);

// Records the outcome for the pending forecast.
//
// # Safety
// `engine` is a live handle and `action` points to `len` readable doubles.
enum CalibraStatus calibra_engine_observe(struct CalibraEngine *engine,
                                          const double *action,
                                          size_t len);

// Scores after the observed periods.
//
// # Safety
// `engine` is a live handle and `out` a valid pointer.
enum CalibraStatus calibra_engine_scores(const struct CalibraEngine *engine,
                                         struct CalibraScores *out);

// Certificate of the latest announcement.
//
// # Safety
// `engine` is a live handle and `out` a valid pointer.
enum CalibraStatus calibra_engine_last_diagnostics(const struct CalibraEngine *engine,
                                                   struct CalibraDiagnostics *out);

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next call into the library from the same thread.
const char *calibra_last_error_message(void);

// Library version as a static nul-terminated string.
const char *calibra_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CALIBRA_H */
