#ifndef FTSBENCH_H
#define FTSBENCH_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FtsStatus {
  FTS_STATUS_OK = 0,
  FTS_STATUS_NULL_POINTER = 1,
  FTS_STATUS_INVALID_INPUT = 2,
  FTS_STATUS_INSUFFICIENT_DATA = 3,
  FTS_STATUS_DIMENSION_MISMATCH = 4,
  FTS_STATUS_NON_FINITE = 5,
  FTS_STATUS_DEGENERATE_VARIANCE = 6,
  FTS_STATUS_NON_STATIONARY = 7,
  FTS_STATUS_OPTIMIZER = 8,
  FTS_STATUS_PARSE = 9,
  FTS_STATUS_IO = 10,
  FTS_STATUS_JSON = 11,
  FTS_STATUS_PANIC = 12,
} FtsStatus;

typedef enum FtsReturnKind {
  FTS_RETURN_KIND_SIMPLE = 0,
  FTS_RETURN_KIND_LOG = 1,
} FtsReturnKind;

/**
 * Opaque fitted ARIMA model.
 */
typedef struct FtsArimaFit FtsArimaFit;

/**
 * Opaque fitted GARCH(1,1) model.
 */
typedef struct FtsGarchFit FtsGarchFit;

/**
 * GARCH(1,1) coefficients, copied out of a fit.
 */
typedef struct FtsGarchParams {
  double mu;
  double alpha0;
  double alpha1;
  double beta1;
} FtsGarchParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fts_version(void);

/**
 * Message for the last failed call on this thread, or null after a
 * successful one. Valid until the next call into this library.
 */
const char *fts_last_error(void);

/**
 * Root mean squared error of two arrays of length `len`.
 *
 * # Safety
 * `predicted` and `actual` must be valid for `len` reads; `out` for one write.
 */
enum FtsStatus fts_rmse(const double *predicted, const double *actual, size_t len, double *out);

/**
 * Returns of `len` consecutive closes, written to `out` (`len - 1` values).
 *
 * # Safety
 * `closes` must be valid for `len` reads and `out` for `len - 1` writes.
 */
enum FtsStatus fts_compute_returns(const double *closes,
                                   size_t len,
                                   enum FtsReturnKind kind,
                                   double *out);

/**
 * Fits ARIMA(p,d,q) to `series` by conditional sum of squares.
 *
 * # Safety
 * `series` must be valid for `len` reads and `out` for one write. The
 * handle written to `out` must be released with [`fts_arima_free`].
 */
enum FtsStatus fts_arima_fit(const double *series,
                             size_t len,
                             size_t p,
                             size_t d,
                             size_t q,
                             struct FtsArimaFit **out);

/**
 * Copies the intercept and coefficients. `phi` needs room for `p` values and
 * `theta` for `q`; MA terms follow the minus-sign convention.
 *
 * # Safety
 * `fit` must be a live handle; the output pointers valid as described.
 */
enum FtsStatus fts_arima_coefficients(const struct FtsArimaFit *fit,
                                      double *c,
                                      double *phi,
                                      double *theta);

/**
 * Writes the log-likelihood, AIC and BIC of a fit. Any output may be null.
 *
 * # Safety
 * `fit` must be a live handle; non-null outputs valid for one write.
 */
enum FtsStatus fts_arima_criteria(const struct FtsArimaFit *fit,
                                  double *loglik,
                                  double *aic,
                                  double *bic);

/**
 * Forecasts `horizon` levels past the end of `history`.
 *
 * # Safety
 * `fit` must be a live handle, `history` valid for `len` reads and `out`
 * for `horizon` writes.
 */
enum FtsStatus fts_arima_forecast(const struct FtsArimaFit *fit,
                                  const double *history,
                                  size_t len,
                                  size_t horizon,
                                  double *out);

/**
 * # Safety
 * `fit` must be null or a handle from [`fts_arima_fit`] not yet freed.
 */
void fts_arima_free(struct FtsArimaFit *fit);

/**
 * Maximum-likelihood GARCH(1,1) fit.
 *
 * # Safety
 * `returns` must be valid for `len` reads and `out` for one write. The
 * handle must be released with [`fts_garch_free`].
 */
enum FtsStatus fts_garch_fit(const double *returns, size_t len, struct FtsGarchFit **out);

/**
 * # Safety
 * `fit` must be a live handle and `out` valid for one write.
 */
enum FtsStatus fts_garch_params(const struct FtsGarchFit *fit, struct FtsGarchParams *out);

/**
 * # Safety
 * `fit` must be a live handle and `out` valid for one write.
 */
enum FtsStatus fts_garch_loglik(const struct FtsGarchFit *fit, double *out);

/**
 * Conditional variance forecasts for the next `horizon` days.
 *
 * # Safety
 * `fit` must be a live handle and `out` valid for `horizon` writes.
 */
enum FtsStatus fts_garch_forecast_variance(const struct FtsGarchFit *fit,
                                           size_t horizon,
                                           double *out);

/**
 * # Safety
 * `fit` must be null or a handle from [`fts_garch_fit`] not yet freed.
 */
void fts_garch_free(struct FtsGarchFit *fit);

/**
 * Runs the benchmark described by the JSON config at `config_path`, writes
 * its output files and returns the report as JSON in `*out_json`, to be
 * released with [`fts_string_free`].
 *
 * # Safety
 * `config_path` must be a NUL-terminated string and `out_json` valid for
 * one write.
 */
enum FtsStatus fts_run_benchmark_json(const char *config_path, char **out_json);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void fts_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FTSBENCH_H */
