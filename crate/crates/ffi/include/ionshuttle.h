#ifndef IONSHUTTLE_H
#define IONSHUTTLE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>
#include <stddef.h>


// Result codes of the C API.
typedef enum IonshuttleStatus {
  IONSHUTTLE_STATUS_OK = 0,
  IONSHUTTLE_STATUS_NULL_POINTER = 1,
  IONSHUTTLE_STATUS_INVALID_ARGUMENT = 2,
  IONSHUTTLE_STATUS_BUFFER_TOO_SMALL = 3,
  IONSHUTTLE_STATUS_SINGULAR_CONFIGURATION = 4,
  IONSHUTTLE_STATUS_ION_CROSSING = 5,
  IONSHUTTLE_STATUS_CONVERGENCE = 6,
  IONSHUTTLE_STATUS_INTEGRATION = 7,
  IONSHUTTLE_STATUS_DESIGN_FAILURE = 8,
  IONSHUTTLE_STATUS_CONFIG = 9,
  IONSHUTTLE_STATUS_PANIC = 10,
} IonshuttleStatus;

// Analytic centre-of-mass trajectory families.
typedef enum IonshuttleFamily {
  IONSHUTTLE_FAMILY_NONIC = 0,
  IONSHUTTLE_FAMILY_COSINE = 1,
} IonshuttleFamily;

// An ion chain in a harmonic trap together with its normal modes.
typedef struct IonshuttleChain IonshuttleChain;

// A trap trajectory `Q0(t)`.
typedef struct IonshuttleTrajectory IonshuttleTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a NUL-terminated string with static lifetime.
const char *ionshuttle_version(void);

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length without the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t ionshuttle_last_error(char *buf, size_t len);

// Creates a chain from ion masses (u, ion 1 first) and the axial frequency of
// ion 1 alone in the trap (Hz).
//
// # Safety
// `masses_amu` must point to `n` doubles; `out` must be writable.
enum IonshuttleStatus ionshuttle_chain_new(const double *masses_amu,
                                           size_t n,
                                           double trap_frequency_hz,
                                           struct IonshuttleChain **out);

// Releases a chain. Null is ignored.
//
// # Safety
// `chain` must come from [`ionshuttle_chain_new`] and not be used afterwards.
void ionshuttle_chain_free(struct IonshuttleChain *chain);

// Number of ions, or 0 for a null handle.
//
// # Safety
// `chain` must be null or a live handle.
size_t ionshuttle_chain_num_ions(const struct IonshuttleChain *chain);

// Normal modes in ascending frequency. Each buffer holds `len` doubles:
// `omega` (rad/s) and `gamma` (kg^1/2) need N, `offsets` (m) needs N and
// `vectors` needs N*N (row k is mode k). Any buffer may be null to skip it.
//
// # Safety
// Non-null buffers must have `len` writable doubles.
enum IonshuttleStatus ionshuttle_chain_modes(const struct IonshuttleChain *chain,
                                             double *omega,
                                             double *gamma,
                                             double *offsets,
                                             double *vectors,
                                             size_t len);

// Constant-velocity ramp over `d` metres in `tf` seconds.
//
// # Safety
// `out` must be writable.
enum IonshuttleStatus ionshuttle_trajectory_linear(double tf,
                                                   double d,
                                                   struct IonshuttleTrajectory **out);

// Error-function ramp with Gaussian velocity of width `sigma` (s).
//
// # Safety
// `out` must be writable.
enum IonshuttleStatus ionshuttle_trajectory_erf(double tf,
                                                double d,
                                                double sigma,
                                                struct IonshuttleTrajectory **out);

// Analytic trajectory leaving the centre of mass at rest, using the chain's
// centre-of-mass frequency times `omega_scale`.
//
// # Safety
// `chain` must be a live handle; `out` must be writable.
enum IonshuttleStatus ionshuttle_trajectory_analytic(const struct IonshuttleChain *chain,
                                                     enum IonshuttleFamily family,
                                                     double tf,
                                                     double d,
                                                     double omega_scale,
                                                     struct IonshuttleTrajectory **out);

// Numerically designed nonic for a two-ion chain. `residual`, if non-null,
// receives the largest end residual relative to `max |gamma| d`.
//
// # Safety
// `chain` must be a live handle; `out` must be writable; `residual` may be null.
enum IonshuttleStatus ionshuttle_trajectory_design(const struct IonshuttleChain *chain,
                                                   double tf,
                                                   double d,
                                                   struct IonshuttleTrajectory **out,
                                                   double *residual);

// Parses a trajectory (or a saved design result) from JSON text.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum IonshuttleStatus ionshuttle_trajectory_from_json(const char *json,
                                                      struct IonshuttleTrajectory **out);

// Writes the trajectory as JSON into `buf` (NUL-terminated). `needed`, if
// non-null, receives the length without the NUL; a short buffer gives
// `BUFFER_TOO_SMALL` and leaves `buf` untouched.
//
// # Safety
// `traj` must be a live handle; `buf` must have `len` writable bytes.
enum IonshuttleStatus ionshuttle_trajectory_to_json(const struct IonshuttleTrajectory *traj,
                                                    char *buf,
                                                    size_t len,
                                                    size_t *needed);

// Releases a trajectory. Null is ignored.
//
// # Safety
// `traj` must come from a trajectory constructor and not be used afterwards.
void ionshuttle_trajectory_free(struct IonshuttleTrajectory *traj);

// Trap position (m), velocity and acceleration at time `t` (s). Outside the
// transport window the trap rests at its end points. Outputs may be null.
//
// # Safety
// `traj` must be a live handle; non-null outputs must be writable.
enum IonshuttleStatus ionshuttle_trajectory_evaluate(const struct IonshuttleTrajectory *traj,
                                                     double t,
                                                     double *q0,
                                                     double *dq0,
                                                     double *ddq0);

// Largest boundary-condition residual, each scaled by `d`, `d/tf` or `d/tf^2`.
//
// # Safety
// `traj` must be a live handle; `out` must be writable.
enum IonshuttleStatus ionshuttle_trajectory_boundary_residual(const struct IonshuttleTrajectory *traj,
                                                              double *out);

// Full classical transport from rest at equilibrium. Writes per-mode quanta
// (N values) and the total energy in quanta of ion 1. `rel_tol <= 0` selects
// the default tolerance.
//
// # Safety
// Handles must be live; `quanta` must be null or hold `len` doubles;
// `total_quanta_omega1` may be null.
enum IonshuttleStatus ionshuttle_simulate(const struct IonshuttleChain *chain,
                                          const struct IonshuttleTrajectory *traj,
                                          double rel_tol,
                                          double *quanta,
                                          size_t len,
                                          double *total_quanta_omega1);

// Excitation predicted by the uncoupled normal-mode model.
//
// # Safety
// As for [`ionshuttle_simulate`].
enum IonshuttleStatus ionshuttle_uncoupled_excitation(const struct IonshuttleChain *chain,
                                                      const struct IonshuttleTrajectory *traj,
                                                      double *quanta,
                                                      size_t len,
                                                      double *total_quanta_omega1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IONSHUTTLE_H */
