#ifndef TDHELM_H
#define TDHELM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum TdhStatus {
  TDH_STATUS_OK = 0,
  TDH_STATUS_NULL_POINTER = 1,
  TDH_STATUS_INVALID_STRING = 2,
  TDH_STATUS_UNKNOWN_CASE = 3,
  TDH_STATUS_INVALID_CONFIG = 4,
  TDH_STATUS_INVALID_HIERARCHY = 5,
  TDH_STATUS_RUN_ABORTED = 6,
  TDH_STATUS_OUT_OF_RANGE = 7,
  TDH_STATUS_BUFFER_TOO_SMALL = 8,
  TDH_STATUS_INTERNAL = 9,
} TdhStatus;

/*
 Run configuration handle.
 */
typedef struct TdhConfig TdhConfig;

/*
 Result of an adaptive run.
 */
typedef struct TdhSolution TdhSolution;

/*
 Scalar summary of a run.
 */
typedef struct TdhReport {
  uint64_t j_stop;
  uint64_t m;
  double dt;
  double t0;
  double t_stop;
  double n_dof_avg;
} TdhReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Static description of a status code.
 */
const char *tdh_status_string(enum TdhStatus status);

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length in bytes.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
uintptr_t tdh_last_error(char *buf, uintptr_t len);

/*
 New configuration for a named case with its defaults.

 # Safety
 `case_name` must be a NUL-terminated string, `out` a valid pointer.
 */
enum TdhStatus tdh_config_new(const char *case_name, struct TdhConfig **out);

/*
 Configuration from TOML text (same schema as the command line tool).

 # Safety
 `text` must be a NUL-terminated string, `out` a valid pointer.
 */
enum TdhStatus tdh_config_from_toml(const char *text, struct TdhConfig **out);

/*
 # Safety
 `cfg` must be null or a handle from this library, not used afterwards.
 */
void tdh_config_free(struct TdhConfig *cfg);

/*
 Sets ω. Defaults that depend on ω (levels, thresholds) follow unless set explicitly.

 # Safety
 `cfg` must be a valid handle.
 */
enum TdhStatus tdh_config_set_omega(struct TdhConfig *cfg, double omega);

/*
 Sets ω from text such as `"10pi"`.

 # Safety
 `cfg` must be a valid handle, `omega` a NUL-terminated string.
 */
enum TdhStatus tdh_config_set_omega_str(struct TdhConfig *cfg, const char *omega);

/*
 # Safety
 `cfg` must be a valid handle, `levels` point to `len` values.
 */
enum TdhStatus tdh_config_set_levels(struct TdhConfig *cfg, const double *levels, uintptr_t len);

/*
 # Safety
 `cfg` must be a valid handle.
 */
enum TdhStatus tdh_config_set_degree(struct TdhConfig *cfg, uint32_t degree);

/*
 # Safety
 `cfg` must be a valid handle.
 */
enum TdhStatus tdh_config_set_thresholds(struct TdhConfig *cfg, double eta0, double eps0);

/*
 # Safety
 `cfg` must be a valid handle.
 */
enum TdhStatus tdh_config_set_cfl(struct TdhConfig *cfg, double cfl);

/*
 Runs the adaptive solver.

 # Safety
 `cfg` must be a valid handle, `out` a valid pointer.
 */
enum TdhStatus tdh_solve(const struct TdhConfig *cfg, struct TdhSolution **out);

/*
 # Safety
 `sol` must be null or a handle from this library, not used afterwards.
 */
void tdh_solution_free(struct TdhSolution *sol);

/*
 # Safety
 `sol` and `out` must be valid pointers.
 */
enum TdhStatus tdh_solution_report(const struct TdhSolution *sol, struct TdhReport *out);

/*
 Number of fine-grid nodes carrying the transform; 0 for a null handle.

 # Safety
 `sol` must be null or a valid handle.
 */
uintptr_t tdh_solution_len(const struct TdhSolution *sol);

/*
 Copies node coordinates and the complex field into caller buffers of length `len`.
 Any of the four buffers may be null to skip it.

 # Safety
 Non-null buffers must hold `len` doubles.
 */
enum TdhStatus tdh_solution_field(const struct TdhSolution *sol,
                                  double *x,
                                  double *y,
                                  double *re,
                                  double *im,
                                  uintptr_t len);

/*
 Evaluates the transform at `(x, y)` (`y` ignored in 1D).

 # Safety
 `sol`, `re`, `im` must be valid pointers.
 */
enum TdhStatus tdh_solution_evaluate(const struct TdhSolution *sol,
                                     double x,
                                     double y,
                                     double *re,
                                     double *im);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TDHELM_H */
