#ifndef LANDAU_LAB_H
#define LANDAU_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum LlStatus {
  LL_STATUS_OK = 0,
  LL_STATUS_NULL_POINTER = 1,
  LL_STATUS_INVALID_ARGUMENT = 2,
  LL_STATUS_INVALID_GRID = 3,
  LL_STATUS_GAMMA_OUT_OF_RANGE = 4,
  LL_STATUS_NEGATIVE_FIELD = 5,
  LL_STATUS_NO_CONVERGENCE = 6,
  LL_STATUS_STABILITY = 7,
  LL_STATUS_IO = 8,
  LL_STATUS_SNAPSHOT = 9,
  LL_STATUS_BUFFER_TOO_SMALL = 10,
  LL_STATUS_NOT_INITIALIZED = 11,
  LL_STATUS_PANIC = 12,
  LL_STATUS_OTHER = 13,
} LlStatus;

/*
 Coefficient fields available through [`ll_coefficient_field`].
 */
typedef enum LlCoefficient {
  /*
   Reaction coefficient `h`.
   */
  LL_COEFFICIENT_H = 0,
  /*
   Trace `a = tr A`.
   */
  LL_COEFFICIENT_A = 1,
  /*
   Smallest eigenvalue of `A`.
   */
  LL_COEFFICIENT_A_STAR = 2,
  /*
   Drift potential.
   */
  LL_COEFFICIENT_POTENTIAL = 3,
} LlCoefficient;

/*
 Density sampled on a lattice.
 */
typedef struct LlField LlField;

/*
 Velocity lattice.
 */
typedef struct LlGrid LlGrid;

/*
 Time stepper together with its current state.
 */
typedef struct LlSolver LlSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *ll_version(void);

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length, or 0 when there is
 no error.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t ll_last_error(char *buf, size_t len);

/*
 Creates a `dim`-dimensional lattice on `[-half_extent, half_extent]^dim`
 with `points` cells per axis.

 # Safety
 `out` must be a valid pointer to writable storage.
 */
enum LlStatus ll_grid_new(size_t dim, double half_extent, size_t points, struct LlGrid **out);

/*
 Number of nodes of the lattice, 0 for a null handle.

 # Safety
 `grid` must be null or a live handle.
 */
size_t ll_grid_len(const struct LlGrid *grid);

/*
 # Safety
 `grid` must be null or a handle from [`ll_grid_new`] not yet freed.
 */
void ll_grid_free(struct LlGrid *grid);

/*
 Unit-mass Maxwellian with unit temperature.

 # Safety
 `grid` must be a live handle and `out` writable.
 */
enum LlStatus ll_field_maxwellian(const struct LlGrid *grid, struct LlField **out);

/*
 Field from `len` nodal values in row-major order (last axis fastest).

 # Safety
 `grid` must be a live handle, `values` must point to `len` doubles and
 `out` must be writable.
 */
enum LlStatus ll_field_from_values(const struct LlGrid *grid,
                                   const double *values,
                                   size_t len,
                                   struct LlField **out);

/*
 Reads a snapshot file.

 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
enum LlStatus ll_field_load(const char *path, struct LlField **out);

/*
 Writes a snapshot file.

 # Safety
 `field` must be a live handle and `path` a NUL-terminated string.
 */
enum LlStatus ll_field_save(const struct LlField *field, const char *path);

/*
 Number of nodal values, 0 for a null handle.

 # Safety
 `field` must be null or a live handle.
 */
size_t ll_field_len(const struct LlField *field);

/*
 Copies the nodal values into `out`, which must hold at least
 [`ll_field_len`] doubles.

 # Safety
 `field` must be a live handle and `out` must point to `len` writable doubles.
 */
enum LlStatus ll_field_values(const struct LlField *field, double *out, size_t len);

/*
 Integral of the field over the whole lattice.

 # Safety
 `field` must be a live handle and `out` writable.
 */
enum LlStatus ll_field_mass(const struct LlField *field, double *out);

/*
 # Safety
 `field` must be null or a handle from this library not yet freed.
 */
void ll_field_free(struct LlField *field);

/*
 Computes one coefficient field of `field` for the interaction exponent
 `gamma` into `out`.

 # Safety
 `field` must be a live handle and `out` must point to `len` writable doubles.
 */
enum LlStatus ll_coefficient_field(const struct LlField *field,
                                   double gamma,
                                   enum LlCoefficient which,
                                   double *out,
                                   size_t len);

/*
 Top eigenvalue `Lambda_f(eps)` of the epsilon-Poincaré operator.

 # Safety
 `field` must be a live handle and `out` writable.
 */
enum LlStatus ll_lambda(const struct LlField *field, double gamma, double eps, double *out);

/*
 Ratio of the two sides of the nonlinear Coulomb inequality for power `p`
 (0 when both sides vanish).

 # Safety
 `field` must be a live handle and `out` writable.
 */
enum LlStatus ll_gks_ratio(const struct LlField *field, double p, double *out);

/*
 Creates an IMEX solver. A positive `dt` fixes the step; otherwise the
 step is chosen from the coefficients.

 # Safety
 `grid` must be a live handle and `out` writable.
 */
enum LlStatus ll_solver_new(const struct LlGrid *grid,
                            double gamma,
                            double dt,
                            struct LlSolver **out);

/*
 Sets the initial density; resets time and ledger.

 # Safety
 Both handles must be live.
 */
enum LlStatus ll_solver_init(struct LlSolver *solver, const struct LlField *field);

/*
 Advances `steps` time steps.

 # Safety
 `solver` must be a live handle.
 */
enum LlStatus ll_solver_step(struct LlSolver *solver, size_t steps);

/*
 Current time, or NaN before initialisation.

 # Safety
 `solver` must be null or a live handle.
 */
double ll_solver_time(const struct LlSolver *solver);

/*
 Entropy `int f log f` of the current density.

 # Safety
 `solver` must be a live handle and `out` writable.
 */
enum LlStatus ll_solver_entropy(const struct LlSolver *solver, double *out);

/*
 Copies the current density into a new field handle.

 # Safety
 `solver` must be a live handle and `out` writable.
 */
enum LlStatus ll_solver_field(const struct LlSolver *solver, struct LlField **out);

/*
 # Safety
 `solver` must be null or a handle from [`ll_solver_new`] not yet freed.
 */
void ll_solver_free(struct LlSolver *solver);

/*
 Whether `gamma` is an admissible interaction exponent in dimension `dim`.
 */
bool ll_gamma_supported(size_t dim, double gamma);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LANDAU_LAB_H */
