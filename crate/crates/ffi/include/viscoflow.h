#ifndef VISCOFLOW_H
#define VISCOFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum VfStatus {
  VF_STATUS_OK = 0,
  VF_STATUS_NULL_POINTER = 1,
  VF_STATUS_INVALID_ARGUMENT = 2,
  VF_STATUS_INVALID_TENSOR = 3,
  VF_STATUS_NO_CONVERGENCE = 4,
  VF_STATUS_DEGENERATE_DRIVING_FORCE = 5,
  VF_STATUS_OUT_OF_RANGE = 6,
  VF_STATUS_PANIC = 7,
  VF_STATUS_OTHER = 8,
} VfStatus;

/**
 * Integrator selector.
 */
typedef enum VfIntegrator {
  VF_INTEGRATOR_EBM = 0,
  VF_INTEGRATOR_MEBM = 1,
  VF_INTEGRATOR_EM = 2,
} VfIntegrator;

/**
 * Validated material, opaque to C.
 */
typedef struct VfMaterial VfMaterial;

/**
 * Integrated trajectory, opaque to C.
 */
typedef struct VfTrajectory VfTrajectory;

/**
 * Plain material parameters, field for field.
 */
typedef struct VfMaterialParams {
  double k;
  double mu;
  double yield_stress;
  double m;
  double eta;
  double k0;
} VfMaterialParams;

/**
 * Output of [`vf_solve_step`].
 */
typedef struct VfStepResult {
  double ci_next[6];
  double xi;
  uint32_t iterations;
  double residual;
} VfStepResult;

/**
 * Output of [`vf_critical_values`].
 */
typedef struct VfStabilityDomain {
  double theta;
  double q;
  double x_cr;
  double f_cr;
  double x_cr_estimate;
  double f_cr_estimate;
} VfStabilityDomain;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null after a
 * successful call. The pointer stays valid until the next call.
 */
const char *vf_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *vf_version(void);

/**
 * Reference parameters (k = 73500, μ = 28200, K = 270, m = 3.6, η = 2e6, k0 = 1).
 */
struct VfMaterialParams vf_default_params(void);

/**
 * Validates `params` and creates a material handle.
 */
enum VfStatus vf_material_new(const struct VfMaterialParams *params, struct VfMaterial **out);

void vf_material_free(struct VfMaterial *material);

/**
 * Free energy of `A = C·Ci⁻¹`, with `a` given as nine doubles, row major.
 */
enum VfStatus vf_free_energy(const struct VfMaterial *material, const double *a, double *out);

/**
 * One implicit step. A negative `xi_guess` means no starting value.
 */
enum VfStatus vf_solve_step(const struct VfMaterial *material,
                            enum VfIntegrator kind,
                            const double *c_next,
                            const double *ci_prev,
                            double dt,
                            double xi_guess,
                            struct VfStepResult *out);

/**
 * Integrates the built-in four-knot loading program from `Ci = 1`.
 */
enum VfStatus vf_integrate_benchmark(const struct VfMaterial *material,
                                     enum VfIntegrator kind,
                                     double dt,
                                     double t_end,
                                     struct VfTrajectory **out);

void vf_trajectory_free(struct VfTrajectory *traj);

/**
 * Number of stored states, including the initial one.
 */
enum VfStatus vf_trajectory_len(const struct VfTrajectory *traj, size_t *out);

/**
 * Time, `Ci`, `det Ci` and overstress of state `index`. Any out pointer
 * may be null to skip that value.
 */
enum VfStatus vf_trajectory_state(const struct VfTrajectory *traj,
                                  size_t index,
                                  double *t,
                                  double *ci,
                                  double *det_ci,
                                  double *overstress);

/**
 * `dist(A, B)` between two symmetric positive definite tensors.
 */
enum VfStatus vf_dist(const double *a, const double *b, double *out);

enum VfStatus vf_q_hat(const double *ci, double *out);

enum VfStatus vf_q_theta(double theta, size_t resolution, double *out);

enum VfStatus vf_critical_values(const struct VfMaterial *material,
                                 double q,
                                 struct VfStabilityDomain *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VISCOFLOW_H */
