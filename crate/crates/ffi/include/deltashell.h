#ifndef DELTASHELL_H
#define DELTASHELL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_ARGUMENT = 2,
  DS_STATUS_DOMAIN = 3,
  DS_STATUS_EXCLUDED_COUPLING = 4,
  DS_STATUS_ILL_CONDITIONED = 5,
  DS_STATUS_NON_HERMITIAN = 6,
  DS_STATUS_NEAR_SURFACE = 7,
  DS_STATUS_MESH = 8,
  DS_STATUS_DIVERGENT = 9,
  DS_STATUS_IO = 10,
  DS_STATUS_BUFFER_TOO_SMALL = 11,
  DS_STATUS_NUMERICAL = 12,
  DS_STATUS_PANIC = 13,
} DsStatus;

/**
 * Boundary discretization of a closed surface.
 */
typedef struct DsDiscretization DsDiscretization;

/**
 * Assembled Weyl function `M_N(lambda)`.
 */
typedef struct DsWeylOperator DsWeylOperator;

/**
 * Physical parameters `m`, `c` and coupling `eta`.
 */
typedef struct DsParams {
  double m;
  double c;
  double eta;
} DsParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; valid until the next call that fails.
 */
const char *ds_last_error(void);

/**
 * Galerkin discretization of the sphere of radius `radius` with an `n_theta` grid.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum DsStatus ds_discretization_sphere(double radius,
                                       size_t n_theta,
                                       struct DsDiscretization **out);

/**
 * Nystrom discretization of the closed triangle mesh at `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DsStatus ds_discretization_mesh(const char *path, struct DsDiscretization **out);

/**
 * Number of unknowns.
 *
 * # Safety
 * `d` must come from a `ds_discretization_*` constructor; `out` must be valid.
 */
enum DsStatus ds_discretization_dim(const struct DsDiscretization *d, size_t *out);

/**
 * # Safety
 * `d` must be NULL or a live handle not freed before.
 */
void ds_discretization_free(struct DsDiscretization *d);

/**
 * Assembles `M_N(lambda)` for `lambda = re + i im`, `im >= 0` or `|re| <= mc^2` when real.
 *
 * # Safety
 * All pointers must be valid; `d` must be a live handle.
 */
enum DsStatus ds_weyl_assemble(const struct DsParams *p,
                               const struct DsDiscretization *d,
                               double re,
                               double im,
                               struct DsWeylOperator **out);

/**
 * `||A - A^*||_F / ||A||_F`.
 *
 * # Safety
 * `op` must be a live handle and `out` valid.
 */
enum DsStatus ds_weyl_hermiticity_residual(const struct DsWeylOperator *op, double *out);

/**
 * All eigenvalues of a Hermitian `M_N(lambda)` in ascending order.
 *
 * # Safety
 * `op` must be a live handle, `out` must hold `cap` doubles and `count` be valid.
 */
enum DsStatus ds_weyl_eigenvalues(const struct DsWeylOperator *op,
                                  double *out,
                                  size_t cap,
                                  size_t *count);

/**
 * # Safety
 * `op` must be NULL or a live handle not freed before.
 */
void ds_weyl_free(struct DsWeylOperator *op);

/**
 * Bound states in `(-mc^2, mc^2)` from a scan on `grid_points` equispaced energies,
 * one entry per root (degenerate levels repeat).
 *
 * # Safety
 * `p` and `d` must be valid, `out` must hold `cap` doubles and `count` be valid.
 */
enum DsStatus ds_bound_states(const struct DsParams *p,
                              const struct DsDiscretization *d,
                              size_t grid_points,
                              double *out,
                              size_t cap,
                              size_t *count);

/**
 * Bound states of the sphere of radius `radius` from the partial-wave matching
 * conditions, `|kappa| <= kappa_max`, each repeated by its multiplicity.
 *
 * # Safety
 * `p` must be valid, `out` must hold `cap` doubles and `count` be valid.
 */
enum DsStatus ds_radial_bound_states(const struct DsParams *p,
                                     double radius,
                                     size_t kappa_max,
                                     size_t scan_points,
                                     double *out,
                                     size_t cap,
                                     size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DELTASHELL_H */
