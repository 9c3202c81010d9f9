#ifndef JUMPSET_H
#define JUMPSET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum JsStatus {
  JS_STATUS_OK = 0,
  JS_STATUS_NULL_POINTER = 1,
  JS_STATUS_INVALID_ARGUMENT = 2,
  JS_STATUS_INVALID_GRID = 3,
  JS_STATUS_OUT_OF_DOMAIN = 4,
  JS_STATUS_DIMENSION_MISMATCH = 5,
  JS_STATUS_NON_FINITE = 6,
  JS_STATUS_DEGENERATE_CONE = 7,
  JS_STATUS_IO = 8,
  JS_STATUS_FORMAT = 9,
  JS_STATUS_BUFFER_TOO_SMALL = 10,
  JS_STATUS_PANIC = 255,
} JsStatus;

/**
 * Grey levels of the point classes.
 */
typedef enum JsClassCode {
  JS_CLASS_CODE_APPROX_CONTINUOUS = 0,
  JS_CLASS_CODE_JUMP = 64,
  JS_CLASS_CODE_SINGULAR_NON_JUMP = 128,
  JS_CLASS_CODE_NON_CONVERGENT = 192,
  JS_CLASS_CODE_INSUFFICIENT = 255,
} JsClassCode;

/**
 * Opaque grid handle.
 */
typedef struct JsGrid JsGrid;

/**
 * Classifier thresholds. `value_range <= 0` means "use the data range".
 */
typedef struct JsClassifyConfig {
  size_t lattice_resolution;
  double sigma;
  double max_radius_cells;
  double min_radius_cells;
  double boundary_fraction;
  double tol_cauchy;
  double tol_const;
  double tol_jump;
  double sep_min;
  double value_range;
} JsClassifyConfig;

/**
 * Classification of one point. Fields not used by `code` are zero.
 */
typedef struct JsPointClass {
  enum JsClassCode code;
  /**
   * Limit value for approximately continuous points.
   */
  double value;
  double a;
  double b;
  /**
   * Jump normal, padded with zeros beyond the grid dimension.
   */
  double normal[3];
  double residual;
  double osc_of_limit;
} JsPointClass;

/**
 * Exclusion cone of a ball `B_rho(z0)`; vectors padded with zeros.
 */
typedef struct JsCone {
  size_t dim;
  double z0[3];
  double axis[3];
  double z0_norm;
  double rho;
  double rho_prime;
  double eps;
  double sin_half_aperture;
  double lipschitz;
  double range;
} JsCone;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *js_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *js_version(void);

/**
 * Creates a grid from row-major `values` (`len` = product of `shape`).
 *
 * # Safety
 * `shape` and `origin` must point to `dim` elements and `values` to `len`.
 */
enum JsStatus js_grid_new(size_t dim,
                          const size_t *shape,
                          double spacing,
                          const double *origin,
                          const double *values,
                          size_t len,
                          struct JsGrid **out);

/**
 * Reads a GF1 grid from its header path.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum JsStatus js_grid_read(const char *path, struct JsGrid **out);

/**
 * Writes a GF1 header and its payload next to it.
 *
 * # Safety
 * `grid` must come from this library; `path` must be NUL-terminated.
 */
enum JsStatus js_grid_write(const struct JsGrid *grid, const char *path);

/**
 * Releases a grid. Null is ignored.
 *
 * # Safety
 * `grid` must come from this library and not be used afterwards.
 */
void js_grid_free(struct JsGrid *grid);

/**
 * Grid dimension, or 0 for null.
 *
 * # Safety
 * `grid` must be null or come from this library.
 */
size_t js_grid_dim(const struct JsGrid *grid);

/**
 * Number of samples, or 0 for null.
 *
 * # Safety
 * `grid` must be null or come from this library.
 */
size_t js_grid_len(const struct JsGrid *grid);

/**
 * Copies the samples into `buf`, which must hold `js_grid_len` values.
 *
 * # Safety
 * `buf` must point to `cap` writable doubles.
 */
enum JsStatus js_grid_values(const struct JsGrid *grid, double *buf, size_t cap);

/**
 * New grid holding `arctan` of the samples (with `±inf -> ±pi/2`).
 *
 * # Safety
 * `grid` must come from this library and `out` be a valid pointer.
 */
enum JsStatus js_grid_phi_apply(const struct JsGrid *grid, struct JsGrid **out);

/**
 * Fills `out` with the default thresholds.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum JsStatus js_classify_config_default(struct JsClassifyConfig *out);

/**
 * Classifies the point `x` (of length `dim`). `config` may be null for
 * the defaults.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum JsStatus js_classify_point(const struct JsGrid *grid,
                                const double *x,
                                size_t dim,
                                const struct JsClassifyConfig *config,
                                struct JsPointClass *out);

/**
 * Lower weighted median of `n` finite values with positive weights.
 *
 * # Safety
 * `values` and `weights` must point to `n` doubles.
 */
enum JsStatus js_weighted_median(const double *values,
                                 const double *weights,
                                 size_t n,
                                 double *out);

/**
 * L¹ oscillation `min_c mean |v - c|` of `n` equally weighted values.
 *
 * # Safety
 * `values` must point to `n` doubles.
 */
enum JsStatus js_osc_values(const double *values, size_t n, double *out);

/**
 * Builds the exclusion cone of `B_rho(center)` for `tau` and `r0`.
 *
 * # Safety
 * `center` must point to `dim` doubles.
 */
enum JsStatus js_cone_from_params(const double *center,
                                  size_t dim,
                                  double rho,
                                  double tau,
                                  double r0,
                                  struct JsCone *out);

/**
 * Whether `delta` lies in the truncated cone.
 *
 * # Safety
 * `cone` must be valid and `delta` point to `cone->dim` doubles.
 */
enum JsStatus js_in_cone(const struct JsCone *cone, const double *delta, bool *out);

/**
 * Number of point pairs farther apart than `guard_dist` with one point in
 * the other's cone. `points` holds `n_points * cone->dim` coordinates.
 *
 * # Safety
 * `cone` must be valid and `points` point to `n_points * cone->dim` doubles.
 */
enum JsStatus js_verify_cone(const struct JsCone *cone,
                             const double *points,
                             size_t n_points,
                             double guard_dist,
                             size_t *out_violations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JUMPSET_H */
