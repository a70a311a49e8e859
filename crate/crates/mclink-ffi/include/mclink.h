#ifndef MCLINK_H
#define MCLINK_H

/* Generated by cbindgen from mclink-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every FFI call.
 */
typedef enum McStatus {
  MC_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MC_STATUS_NULL_POINTER = 1,
  /**
   * Parameters outside their physical or configured domain.
   */
  MC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The threshold never crosses the pulse (no output window).
   */
  MC_STATUS_NO_CROSSING = 3,
  /**
   * The requested accuracy could not be reached.
   */
  MC_STATUS_ACCURACY = 4,
  /**
   * Search/stability/internal failures.
   */
  MC_STATUS_INTERNAL_ERROR = 5,
} McStatus;

/**
 * Opaque flow environment handle.
 */
typedef struct McEnv McEnv;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message of the current thread; valid until the next failing
 * call on this thread. Never null.
 */
const char *mc_last_error_message(void);

/**
 * Creates a flow environment from an explicit effective diffusivity.
 * The handle must be released with `mc_env_free`.
 */
enum McStatus mc_env_new(double v_eff, double d, double d_eff, struct McEnv **out_env);

/**
 * Creates a flow environment with the effective diffusivity computed from
 * the Taylor-Aris dispersion of a rectangular channel (dimensions in m).
 */
enum McStatus mc_env_new_taylor_aris(double v_eff,
                                     double d,
                                     double length,
                                     double width,
                                     double height,
                                     struct McEnv **out_env);

/**
 * Releases an environment handle. Null is accepted and ignored.
 */
void mc_env_free(struct McEnv *env);

/**
 * Pure convection-diffusion response to a rectangular inlet pulse,
 * evaluated at station `x` for `len` time points.
 */
enum McStatus mc_convdiff_rect(const struct McEnv *env,
                               double c0,
                               double t_on,
                               double t0,
                               double x,
                               const double *times,
                               double *out,
                               uintptr_t len);

/**
 * Surviving reactant concentration of the reacting channel (A + B -> AB).
 */
enum McStatus mc_theorem1_reactant(const struct McEnv *env,
                                   double c0,
                                   double t_on,
                                   double t0,
                                   double k,
                                   double c_b0,
                                   double x,
                                   const double *times,
                                   double *out,
                                   uintptr_t len);

/**
 * Product concentration of the reacting channel (A + B -> AB).
 */
enum McStatus mc_theorem1_product(const struct McEnv *env,
                                  double c0,
                                  double t_on,
                                  double t0,
                                  double k,
                                  double c_b0,
                                  double x,
                                  const double *times,
                                  double *out,
                                  uintptr_t len);

/**
 * Times at which a Gaussian pulse crosses the threshold supply level.
 */
enum McStatus mc_gauss_crossing_times(double c0,
                                      double mu,
                                      double sigma2,
                                      double c_b0,
                                      double *out_t1,
                                      double *out_t2);

/**
 * Clipped-Gaussian approximation of the thresholded residual.
 */
enum McStatus mc_theorem2_appro1(const struct McEnv *env,
                                 double c0,
                                 double mu,
                                 double sigma2,
                                 double c_b0,
                                 double x,
                                 const double *times,
                                 double *out,
                                 uintptr_t len);

/**
 * Laplace-inversion approximation of the thresholded residual, evaluated on
 * the whole time grid at once (the quadrature nodes are shared).
 */
enum McStatus mc_theorem2_appro2(const struct McEnv *env,
                                 double c0,
                                 double mu,
                                 double sigma2,
                                 double c_b0,
                                 double x,
                                 const double *times,
                                 double *out,
                                 uintptr_t len);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MCLINK_H */
