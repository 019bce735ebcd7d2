#ifndef HJDEFECT_H
#define HJDEFECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HjKinetic {
  // `|p|`
  HJ_KINETIC_NORM = 0,
  // `sqrt(1 + |p|^2) - 1`
  HJ_KINETIC_RELATIVISTIC = 1,
} HjKinetic;

typedef enum HjStatus {
  HJ_STATUS_OK = 0,
  HJ_STATUS_CONFIG = 1,
  HJ_STATUS_DOMAIN = 2,
  HJ_STATUS_PRECONDITION = 3,
  HJ_STATUS_INCONSISTENT = 4,
  HJ_STATUS_NOT_CONVERGED = 5,
  HJ_STATUS_WINDOW_TOO_SMALL = 6,
  HJ_STATUS_IO = 7,
  HJ_STATUS_NULL_POINTER = 8,
  HJ_STATUS_PANIC = 9,
} HjStatus;

// Values on a uniform grid.
typedef struct HjField HjField;

// Hamiltonian `K(p) - l_per(x) - l_0(x)`.
typedef struct HjSpec HjSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *hj_last_error(void);

// Library version as a static string.
const char *hj_version(void);

// Separable Hamiltonian in dimension 1 or 2. The environment is
// `amplitude * sin(2 pi y)` (summed over axes in 2D, zero if `amplitude`
// is 0). `depth > 0` adds a cos² well of that depth, `depth < 0` a hump of
// height `-depth`, `0` no defect.
//
// # Safety
// `out` must be a valid pointer.
enum HjStatus hj_spec_new(uint32_t dim,
                          enum HjKinetic kinetic,
                          double amplitude,
                          double depth,
                          struct HjSpec **out);

// # Safety
// `spec` must come from `hj_spec_new` and not be freed twice.
void hj_spec_free(struct HjSpec *spec);

// Closed-form `H̄(p)` for `|p| - amplitude*sin(2 pi y)` in 1D.
//
// # Safety
// `out` must be a valid pointer.
enum HjStatus hj_analytic_hbar_1d(double amplitude, double p, double *out);

// Closed-form ergodic constant in 1D for a downward well of `depth`.
//
// # Safety
// `out` must be a valid pointer.
enum HjStatus hj_analytic_ergodic_1d(double amplitude, double depth, double *out);

// Exact single-defect solution at `x` in a flat 1D environment (`α = 1`).
//
// # Safety
// `out` must be a valid pointer.
enum HjStatus hj_u_eps_flat(double depth, double eps, double x, double *out);

// Numeric `H̄(p)`; `p` has `dim` entries.
//
// # Safety
// `spec` must be a live handle, `p` must hold `dim` doubles, `out` valid.
enum HjStatus hj_effective_hamiltonian(const struct HjSpec *spec,
                                       const double *p,
                                       size_t torus_nodes,
                                       double *out);

// Ergodic constant of the defect from a sweep of `n` increasing radii.
//
// # Safety
// `spec` must be a live handle, `radii` must hold `n` doubles, `out` valid.
enum HjStatus hj_ergodic_constant(const struct HjSpec *spec,
                                  const double *radii,
                                  size_t n,
                                  double h,
                                  double *out);

// Solves `α u + H(x/ε, Du) = 0` on `[-half_width, half_width]^d` with
// spacing `h`.
//
// # Safety
// `spec` must be a live handle and `out` a valid pointer.
enum HjStatus hj_solve_eps(const struct HjSpec *spec,
                           double alpha,
                           double eps,
                           double half_width,
                           double h,
                           struct HjField **out);

// Number of nodes (including inactive ones).
//
// # Safety
// `field` must be a live handle.
size_t hj_field_len(const struct HjField *field);

// # Safety
// `field` must be a live handle.
uint32_t hj_field_dim(const struct HjField *field);

// # Safety
// `field` must be a live handle.
double hj_field_spacing(const struct HjField *field);

// Copies all node values into `buf`, which must hold `hj_field_len` doubles.
//
// # Safety
// `field` must be a live handle and `buf` must hold `cap` doubles.
enum HjStatus hj_field_values(const struct HjField *field, double *buf, size_t cap);

// Coordinates of node `index` into `xy[0..2]` (second entry 0 in 1D).
//
// # Safety
// `field` must be a live handle and `xy` must hold 2 doubles.
enum HjStatus hj_field_coords(const struct HjField *field, size_t index, double *xy);

// Interpolated value at `x` (`dim` entries).
//
// # Safety
// `field` must be a live handle, `x` must hold `dim` doubles, `out` valid.
enum HjStatus hj_field_eval(const struct HjField *field, const double *x, double *out);

// # Safety
// `field` must come from `hj_solve_eps` and not be freed twice.
void hj_field_free(struct HjField *field);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HJDEFECT_H */
