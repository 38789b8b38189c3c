#ifndef PLATE_STOKES_H
#define PLATE_STOKES_H

#include <stddef.h>
#include <stdint.h>

typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_ARGUMENT = 2,
  PS_STATUS_SOLVER = 3,
  PS_STATUS_NUMERICS = 4,
  PS_STATUS_IO = 5,
  PS_STATUS_PANIC = 6,
  PS_STATUS_BUFFER_TOO_SMALL = 7,
  PS_STATUS_OUT_OF_RANGE = 8,
} PsStatus;

/*
 Opaque discrete solution of one level.
 */
typedef struct PsSolution PsSolution;

/*
 Opaque convergence study.
 */
typedef struct PsStudy PsStudy;

/*
 Errors of one level of the manufactured case.
 */
typedef struct PsLevelErrors {
  uint32_t level;
  uint64_t plate_elements;
  uint64_t fluid_elements;
  double char_length;
  double plate_h2;
  double plate_h1;
  double plate_l2;
  double fluid_l2;
  double fluid_h1;
  double pressure_l2;
  double energy_residual;
  double energy_scale;
} PsLevelErrors;

/*
 Observed rates between two consecutive levels.
 */
typedef struct PsRates {
  uint32_t from_level;
  uint32_t to_level;
  double plate_h2;
  double plate_h1;
  double plate_l2;
  double fluid_l2;
  double fluid_h1;
  double pressure_l2;
} PsRates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *ps_version(void);

/*
 Copies the calling thread's last error message into `buf`. Returns the
 message length including the NUL, or 0 when there is no error. The copy
 is truncated to fit `len`.

 # Safety
 `buf` must be writable for `len` bytes or null.
 */
uintptr_t ps_last_error_message(char *buf, uintptr_t len);

/*
 Runs the manufactured convergence study on `n_levels` strictly increasing levels.

 # Safety
 `levels` must point to `n_levels` values; `out` must be writable.
 */
enum PsStatus ps_study_run(const uint32_t *levels,
                           uintptr_t n_levels,
                           double lambda,
                           double rho,
                           struct PsStudy **out);

/*
 # Safety
 `study` must come from [`ps_study_run`] or be null.
 */
void ps_study_free(struct PsStudy *study);

/*
 Number of levels in the study, 0 for a null handle.

 # Safety
 `study` must be a live handle or null.
 */
uintptr_t ps_study_n_levels(const struct PsStudy *study);

/*
 # Safety
 `study` must be a live handle; `out` must be writable.
 */
enum PsStatus ps_study_level_errors(const struct PsStudy *study,
                                    uintptr_t index,
                                    struct PsLevelErrors *out);

/*
 Rates between levels `index` and `index + 1`.

 # Safety
 `study` must be a live handle; `out` must be writable.
 */
enum PsStatus ps_study_rates(const struct PsStudy *study, uintptr_t index, struct PsRates *out);

/*
 Writes the study as CSV. Call with a null `buf` to learn the size.

 # Safety
 `study` must be a live handle; `buf` writable for `len` bytes or null.
 */
enum PsStatus ps_study_csv(const struct PsStudy *study,
                           char *buf,
                           uintptr_t len,
                           uintptr_t *needed);

/*
 Solves the manufactured case at one level.

 # Safety
 `out` must be writable.
 */
enum PsStatus ps_solve_level(uint32_t level, double lambda, double rho, struct PsSolution **out);

/*
 # Safety
 `solution` must come from [`ps_solve_level`] or be null.
 */
void ps_solution_free(struct PsSolution *solution);

/*
 # Safety
 `solution` must be a live handle; `out` must be writable.
 */
enum PsStatus ps_solution_errors(const struct PsSolution *solution, struct PsLevelErrors *out);

/*
 Plate displacement `w₁h(x, y)`.

 # Safety
 `solution` must be a live handle; `value` must be writable.
 */
enum PsStatus ps_solution_plate(const struct PsSolution *solution,
                                double x,
                                double y,
                                double *value);

/*
 Fluid velocity at `(x, y, z)` written to `velocity[0..3]`.

 # Safety
 `solution` must be a live handle; `velocity` writable for three values.
 */
enum PsStatus ps_solution_velocity(const struct PsSolution *solution,
                                   double x,
                                   double y,
                                   double z,
                                   double *velocity);

/*
 # Safety
 `solution` must be a live handle; `value` must be writable.
 */
enum PsStatus ps_solution_pressure(const struct PsSolution *solution,
                                   double x,
                                   double y,
                                   double z,
                                   double *value);

/*
 Discrete inf-sup constant `β_h` and `∫ξ_h` at one level.

 # Safety
 `beta` and `xi_integral` must be writable.
 */
enum PsStatus ps_infsup(uint32_t level, double *beta, double *xi_integral);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLATE_STOKES_H */
