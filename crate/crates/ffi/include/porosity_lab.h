#ifndef POROSITY_LAB_H
#define POROSITY_LAB_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PlPorosity {
  PL_POROSITY_CERTIFIED = 0,
  PL_POROSITY_NOT_CERTIFIED = 2,
  PL_POROSITY_DISPROVED = 3,
} PlPorosity;

typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_POINTER = 1,
  /**
   * The input is not a valid quasi-metric measure space.
   */
  PL_STATUS_VALIDATION = 4,
  /**
   * Bad argument, unreadable file or malformed input.
   */
  PL_STATUS_CONFIG = 5,
  /**
   * The computation itself failed (see `pl_last_error`).
   */
  PL_STATUS_COMPUTE = 6,
  PL_STATUS_PANIC = 7,
} PlStatus;

/**
 * Opaque space handle.
 */
typedef struct PlSpace PlSpace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after success.
 * Valid until the next call on the same thread.
 */
const char *pl_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *pl_version(void);

/**
 * Loads a JSON or CSV space file.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out` a valid pointer.
 */
enum PlStatus pl_space_load(const char *path, struct PlSpace **out);

/**
 * Builds a space from weights and a dense row-major table over
 * `n_sample + n_obstacles` points. Sample ids are `0..n_sample`, obstacle
 * ids follow.
 *
 * # Safety
 * `weights` must hold `n_sample` values and `table` `(n_sample +
 * n_obstacles)^2` values; `out` must be valid.
 */
enum PlStatus pl_space_from_table(size_t n_sample,
                                  size_t n_obstacles,
                                  const double *weights,
                                  const double *table,
                                  struct PlSpace **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum PlStatus pl_space_cantor(double ratio,
                              uint32_t depth,
                              uint32_t mesh_factor,
                              struct PlSpace **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum PlStatus pl_space_lacunary(uint32_t depth, struct PlSpace **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum PlStatus pl_space_grid(size_t dimension,
                            size_t n_per_side,
                            double measure_exponent,
                            struct PlSpace **out);

/**
 * New space with distance `c * d^s`; the input handle is untouched.
 *
 * # Safety
 * `space` must be a live handle, `out` a valid pointer.
 */
enum PlStatus pl_space_snowflake(const struct PlSpace *space,
                                 double s,
                                 double c,
                                 struct PlSpace **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `space` must come from this library and not be used afterwards.
 */
void pl_space_free(struct PlSpace *space);

/**
 * # Safety
 * `space` must be a live handle, the out-pointers valid.
 */
enum PlStatus pl_space_size(const struct PlSpace *space, size_t *n_sample, size_t *n_obstacles);

/**
 * Least triangular constant `K`.
 *
 * # Safety
 * `space` must be a live handle, `out` valid.
 */
enum PlStatus pl_triangular_constant(const struct PlSpace *space, double *out);

/**
 * Doubling constant `A` over every canonical ball.
 *
 * # Safety
 * `space` must be a live handle, `out` valid.
 */
enum PlStatus pl_doubling_constant(const struct PlSpace *space, double *out);

/**
 * Maximal hole of the ball `B(center, radius)`.
 *
 * # Safety
 * `space` must be a live handle, `rho` valid.
 */
enum PlStatus pl_hole_radius(const struct PlSpace *space,
                             uint64_t center,
                             double radius,
                             double *rho);

/**
 * Hole doubling constant over every canonical ball.
 *
 * # Safety
 * `space` must be a live handle, `out` valid.
 */
enum PlStatus pl_hole_doubling_constant(const struct PlSpace *space, double *out);

/**
 * A1 constant of `dist(., E)^(-alpha)`.
 *
 * # Safety
 * `space` must be a live handle, `out` valid.
 */
enum PlStatus pl_a1_constant(const struct PlSpace *space, double alpha, double *out);

/**
 * Greedy porosity certification over every canonical ball.
 * `min_fraction` receives the smallest packed fraction found.
 *
 * # Safety
 * `space` must be a live handle, the out-pointers valid.
 */
enum PlStatus pl_certify(const struct PlSpace *space,
                         double sigma,
                         double gamma,
                         enum PlPorosity *verdict,
                         double *min_fraction);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POROSITY_LAB_H */
