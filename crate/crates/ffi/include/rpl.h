#ifndef RPL_H
#define RPL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RplStatus {
  RPL_STATUS_OK = 0,
  /**
   * A required pointer argument was null or a string was not UTF-8.
   */
  RPL_STATUS_BAD_ARGUMENT = 1,
  RPL_STATUS_INVALID_PARAMETER = 2,
  RPL_STATUS_DEGENERATE = 3,
  RPL_STATUS_IO = 4,
  RPL_STATUS_FORMAT = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  RPL_STATUS_INTERNAL = 6,
} RplStatus;

typedef struct RplMeasure RplMeasure;

typedef struct RplSweep RplSweep;

/**
 * Lower-bound curves at one dimension.
 */
typedef struct RplBounds {
  double new_bound;
  double oberlin;
  double jjll;
  /**
   * 1 when `oberlin` comes from the extension below `s = 1`.
   */
  uint8_t oberlin_extended;
} RplBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library from the same thread.
 */
const char *rpl_last_error(void);

const char *rpl_version(void);

/**
 * Uniform measure on a depth-`depth` Cantor product.
 *
 * # Safety
 * `out_measure` must be valid for writes.
 */
enum RplStatus rpl_measure_cantor(double sx,
                                  double sy,
                                  double sr,
                                  uint32_t depth,
                                  uint64_t seed,
                                  struct RplMeasure **out_measure);

/**
 * Lattice sample of a horizontal plane slice, `per_side²` atoms.
 *
 * # Safety
 * `out_measure` must be valid for writes.
 */
enum RplStatus rpl_measure_plane(uint32_t per_side, uint64_t seed, struct RplMeasure **out_measure);

/**
 * Measure from `n` atoms `(x1[i], x2[i], r[i])` with weights `w[i]`
 * summing to 1. The result has generation scale 0.
 *
 * # Safety
 * The four arrays must each hold `n` values; `out_measure` must be valid for writes.
 */
enum RplStatus rpl_measure_from_arrays(const double *x1,
                                       const double *x2,
                                       const double *r,
                                       const double *w,
                                       size_t n,
                                       struct RplMeasure **out_measure);

/**
 * Reads a measure CSV and its metadata sidecar if present.
 *
 * # Safety
 * `csv_path` must be a NUL-terminated string; `out_measure` must be valid for writes.
 */
enum RplStatus rpl_measure_read(const char *csv_path, struct RplMeasure **out_measure);

/**
 * # Safety
 * `measure` must come from this library; `csv_path` must be NUL-terminated.
 */
enum RplStatus rpl_measure_write(const struct RplMeasure *measure, const char *csv_path);

/**
 * Number of atoms, 0 for a null handle.
 *
 * # Safety
 * `measure` must be null or come from this library.
 */
size_t rpl_measure_len(const struct RplMeasure *measure);

/**
 * # Safety
 * `measure` must be null or come from this library.
 */
double rpl_measure_generation_scale(const struct RplMeasure *measure);

/**
 * Copies atom `i` into `xyzw` as `(x1, x2, r, w)`.
 *
 * # Safety
 * `measure` must come from this library; `xyzw` must hold 4 values.
 */
enum RplStatus rpl_measure_atom(const struct RplMeasure *measure, size_t i, double *xyzw);

/**
 * # Safety
 * `measure` must be null or come from this library, and not be used again.
 */
void rpl_measure_free(struct RplMeasure *measure);

/**
 * Tube mass `μ{z′ : |π_θ(z) − π_θ(z′)| ≤ δ}` at `z = (x1, x2, r)`.
 *
 * # Safety
 * `measure` must come from this library; `out_mass` must be valid for writes.
 */
enum RplStatus rpl_m_pi(const struct RplMeasure *measure,
                        double t,
                        double theta,
                        double x1,
                        double x2,
                        double r,
                        double delta,
                        double *out_mass);

/**
 * Unordered pairs with `Δ ≤ 2δ` and `τ ≤ |z − z′| < 2τ`, by count and by
 * product mass.
 *
 * # Safety
 * `measure` must come from this library; both outputs must be valid.
 */
enum RplStatus rpl_count_tangent_pairs(const struct RplMeasure *measure,
                                       double delta,
                                       double tau,
                                       uint64_t *out_pairs,
                                       double *out_mass);

/**
 * Mass of the high-multiplicity set at one scale. `theta_samples = 0`
 * selects the default `⌈64/δ⌉`.
 *
 * # Safety
 * `measure` must come from this library; `out_z_mass` must be valid.
 */
enum RplStatus rpl_high_multiplicity(const struct RplMeasure *measure,
                                     double t,
                                     double s,
                                     double kappa,
                                     double eta,
                                     double delta,
                                     size_t theta_samples,
                                     double *out_z_mass);

/**
 * Per-angle box dimensions over scales `2^-finest ..= 2^-coarsest`.
 *
 * # Safety
 * `measure` must come from this library; `out_sweep` must be valid.
 */
enum RplStatus rpl_sweep(const struct RplMeasure *measure,
                         double t,
                         size_t theta_count,
                         uint32_t finest,
                         uint32_t coarsest,
                         struct RplSweep **out_sweep);

/**
 * # Safety
 * `sweep` must be null or come from this library.
 */
size_t rpl_sweep_len(const struct RplSweep *sweep);

/**
 * Copies up to `cap` `(theta, dim)` rows into `thetas` and `dims`; returns
 * the number written.
 *
 * # Safety
 * `sweep` must come from this library; both buffers must hold `cap` values.
 */
size_t rpl_sweep_copy(const struct RplSweep *sweep, double *thetas, double *dims, size_t cap);

/**
 * # Safety
 * `sweep` must be null or come from this library.
 */
double rpl_sweep_median(const struct RplSweep *sweep);

/**
 * Share of angles with estimate at least `level`.
 *
 * # Safety
 * `sweep` must be null or come from this library.
 */
double rpl_sweep_fraction_at_least(const struct RplSweep *sweep, double level);

/**
 * # Safety
 * `sweep` must be null or come from this library, and not be used again.
 */
void rpl_sweep_free(struct RplSweep *sweep);

/**
 * # Safety
 * `out_bounds` must be valid for writes.
 */
enum RplStatus rpl_theoretical_bounds(double s, struct RplBounds *out_bounds);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RPL_H */
