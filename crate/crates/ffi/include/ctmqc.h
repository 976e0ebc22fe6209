#ifndef CTMQC_H
#define CTMQC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CtmqcStatus {
  CTMQC_STATUS_OK = 0,
  CTMQC_STATUS_NULL_POINTER = 1,
  CTMQC_STATUS_INVALID_UTF8 = 2,
  CTMQC_STATUS_INVALID_CONFIG = 3,
  CTMQC_STATUS_NUMERICAL_FAILURE = 4,
  CTMQC_STATUS_OUT_OF_RANGE = 5,
  CTMQC_STATUS_PANIC = 6,
} CtmqcStatus;

/**
 * Opaque simulation handle.
 */
typedef struct CtmqcSimulation CtmqcSimulation;

/**
 * Trajectory-averaged observables at the current time.
 */
typedef struct CtmqcObservables {
  double t_fs;
  double pop0;
  double pop1;
  double coherence;
  double energy_mean_ha;
  double energy_drift_ha;
  double norm_dev;
  double spurious_per_fs;
  double fallback_fraction;
} CtmqcObservables;

typedef struct CtmqcTrajectory {
  double r_bohr;
  double v_au;
  double pop0;
  double pop1;
  /**
   * BO momenta entering the coupling terms.
   */
  double f0;
  double f1;
  double quantum_momentum;
} CtmqcTrajectory;

typedef struct CtmqcAdiabatic {
  double e0;
  double e1;
  double grad_e0;
  double grad_e1;
  double d01;
} CtmqcAdiabatic;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *ctmqc_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ctmqc_last_error_message(void);

/**
 * Creates a simulation from a JSON run configuration.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CtmqcStatus ctmqc_simulation_new(const char *config_json,
                                      uint64_t seed,
                                      struct CtmqcSimulation **out);

/**
 * # Safety
 * `sim` must come from [`ctmqc_simulation_new`] and not be used afterwards.
 * NULL is ignored.
 */
void ctmqc_simulation_free(struct CtmqcSimulation *sim);

/**
 * Advances by `n_steps` time steps.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum CtmqcStatus ctmqc_simulation_step(struct CtmqcSimulation *sim, uint64_t n_steps);

/**
 * Steps until the configured end time.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum CtmqcStatus ctmqc_simulation_run_to_end(struct CtmqcSimulation *sim);

/**
 * # Safety
 * `sim` must be a live handle and `out` valid for writes.
 */
enum CtmqcStatus ctmqc_simulation_observables(struct CtmqcSimulation *sim,
                                              struct CtmqcObservables *out);

/**
 * # Safety
 * `sim` must be a live handle and `out` valid for writes.
 */
enum CtmqcStatus ctmqc_simulation_trajectory(struct CtmqcSimulation *sim,
                                             size_t index,
                                             struct CtmqcTrajectory *out);

/**
 * # Safety
 * `sim` must be a live handle and `out` valid for writes.
 */
enum CtmqcStatus ctmqc_simulation_time_fs(struct CtmqcSimulation *sim, double *out);

/**
 * # Safety
 * `sim` must be a live handle and `out` valid for writes.
 */
enum CtmqcStatus ctmqc_simulation_n_traj(struct CtmqcSimulation *sim, size_t *out);

/**
 * Adiabatic energies, gradients and coupling of a model at `r_bohr`.
 *
 * # Safety
 * `model` must be a NUL-terminated string and `out` valid for writes.
 */
enum CtmqcStatus ctmqc_model_adiabatic(const char *model,
                                       double r_bohr,
                                       struct CtmqcAdiabatic *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTMQC_H */
