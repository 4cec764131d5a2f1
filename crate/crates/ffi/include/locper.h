#ifndef LOCPER_H
#define LOCPER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LocperCurve {
  LOCPER_CURVE_E0 = 0,
  LOCPER_CURVE_E1 = 1,
  LOCPER_CURVE_E2 = 2,
} LocperCurve;

typedef enum LocperStatus {
  LOCPER_STATUS_OK = 0,
  LOCPER_STATUS_NULL_POINTER = 1,
  LOCPER_STATUS_INVALID_ARGUMENT = 2,
  LOCPER_STATUS_VALIDATION = 3,
  LOCPER_STATUS_SOLVER = 4,
  LOCPER_STATUS_IO = 5,
  LOCPER_STATUS_PANIC = 6,
  LOCPER_STATUS_INTERNAL = 7,
} LocperStatus;

/**
 * Opaque experiment configuration.
 */
typedef struct LocperConfig LocperConfig;

/**
 * Opaque coefficient field.
 */
typedef struct LocperField LocperField;

/**
 * Opaque convergence report, possibly partial.
 */
typedef struct LocperReport LocperReport;

typedef struct LocperPoint {
  size_t eps_denominator;
  double eps;
  double e0;
  double e1;
  double e2;
} LocperPoint;

typedef struct LocperFit {
  double slope;
  double intercept;
  double residual;
} LocperFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated, truncated to
 * `len`) and returns its full length without the terminator. `buf` may be null to query
 * the length.
 */
size_t locper_last_error(char *buf, size_t len);

/**
 * Builds a builtin family. `keys` and `values` hold `n_params` parameter pairs and may be
 * null when `n_params` is 0.
 */
enum LocperStatus locper_field_new(const char *family,
                                   const char *const *keys,
                                   const double *values,
                                   size_t n_params,
                                   struct LocperField **out_field);

void locper_field_free(struct LocperField *field);

enum LocperStatus locper_field_dim(const struct LocperField *field, size_t *out_dim);

/**
 * Writes a(x, y) row-major into `out_matrix`, which holds dim² values; `x` and `y` hold dim.
 */
enum LocperStatus locper_field_eval(const struct LocperField *field,
                                    const double *x,
                                    const double *y,
                                    double *out_matrix);

/**
 * Effective matrix at the n_x^dim slow samples, row-major per sample, written to
 * `out_a0` (capacity `cap` values, at least n_x^dim · dim²). `out_len` receives the count.
 */
enum LocperStatus locper_effective_matrix(const struct LocperField *field,
                                          size_t n_x,
                                          size_t n_y,
                                          double *out_a0,
                                          size_t cap,
                                          size_t *out_len);

enum LocperStatus locper_config_load(const char *path, struct LocperConfig **out_config);

enum LocperStatus locper_config_parse(const char *text, struct LocperConfig **out_config);

void locper_config_free(struct LocperConfig *config);

enum LocperStatus locper_config_eps_count(const struct LocperConfig *config, size_t *out_count);

/**
 * Runs the sweep. On a stage failure the partial report is still returned through
 * `out_report` (when any setup finished) together with the failure status.
 */
enum LocperStatus locper_sweep_run(const struct LocperConfig *config,
                                   struct LocperReport **out_report);

void locper_report_free(struct LocperReport *report);

enum LocperStatus locper_report_len(const struct LocperReport *report, size_t *out_len);

enum LocperStatus locper_report_point(const struct LocperReport *report,
                                      size_t index,
                                      struct LocperPoint *out_point);

/**
 * 1 when the errors sit at the discretization floor, 0 otherwise.
 */
enum LocperStatus locper_report_is_floor(const struct LocperReport *report, int32_t *out_flag);

/**
 * 1 when the sweep aborted and the report holds only the finished points.
 */
enum LocperStatus locper_report_is_partial(const struct LocperReport *report, int32_t *out_flag);

enum LocperStatus locper_report_fit(const struct LocperReport *report,
                                    enum LocperCurve curve,
                                    struct LocperFit *out_fit);

/**
 * Writes convergence.csv, timings.csv, summary.txt and loglog.dat into `dir`.
 */
enum LocperStatus locper_report_write(const struct LocperReport *report, const char *dir);

/**
 * Least-squares slope of ln(errors) against ln(eps) over `n` points.
 */
enum LocperStatus locper_fit_rate(const double *eps,
                                  const double *errors,
                                  size_t n,
                                  struct LocperFit *out_fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOCPER_H */
