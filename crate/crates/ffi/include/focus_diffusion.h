#ifndef FOCUS_DIFFUSION_H
#define FOCUS_DIFFUSION_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FdStatus {
  FD_STATUS_OK = 0,
  FD_STATUS_NULL_POINTER = 1,
  FD_STATUS_DOMAIN = 2,
  FD_STATUS_SETUP = 3,
  FD_STATUS_NUMERICAL = 4,
  FD_STATUS_ALGEBRA = 5,
  FD_STATUS_MODEL = 6,
  FD_STATUS_CONFIG = 7,
  FD_STATUS_INVARIANT = 8,
  FD_STATUS_IO = 9,
  FD_STATUS_PANIC = 10,
} FdStatus;

/**
 * Finished Monte Carlo ensemble.
 */
typedef struct FdEnsemble FdEnsemble;

/**
 * Scattering setup handle.
 */
typedef struct FdSetup FdSetup;

/**
 * Monte Carlo run parameters; start from `fd_mc_params_default`.
 */
typedef struct FdMcParams {
  size_t n_particles;
  double dt;
  double t_max;
  size_t n_snapshots;
  uint64_t seed;
  double fit_window;
  double vacf_cutoff;
  size_t n_batches;
  /**
   * Worker threads; 0 uses the global pool. Results do not depend on it.
   */
  size_t threads;
} FdMcParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *fd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fd_version(void);

/**
 * Create a setup from speed, pitch-angle diffusion constant and ξ.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum FdStatus fd_setup_new(double v, double d, double xi, struct FdSetup **out);

/**
 * Create a setup from the focusing length L (infinite for none).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum FdStatus fd_setup_from_length(double v,
                                   double d,
                                   double focusing_length,
                                   struct FdSetup **out);

/**
 * # Safety
 * `setup` must come from `fd_setup_new`/`fd_setup_from_length` or be null.
 */
void fd_setup_free(struct FdSetup *setup);

/**
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum FdStatus fd_setup_xi(const struct FdSetup *setup, double *out);

/**
 * κ_z = v(coth ξ − 1/ξ).
 *
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum FdStatus fd_kappa_z(const struct FdSetup *setup, double *out);

/**
 * Bieber–Walter parallel diffusion coefficient.
 *
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum FdStatus fd_kappa_zz_bw(const struct FdSetup *setup, double *out);

/**
 * κ_tz.
 *
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum FdStatus fd_kappa_tz(const struct FdSetup *setup, double *out);

/**
 * κ_tzz.
 *
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum FdStatus fd_kappa_tzz(const struct FdSetup *setup, double *out);

/**
 * κ_zz − κ_z κ_tz.
 *
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum FdStatus fd_kappa_dv_formula(const struct FdSetup *setup, double *out);

/**
 * Late-time displacement-variance coefficient from the exact integral.
 *
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum FdStatus fd_kappa_dv_exact(const struct FdSetup *setup, double *out);

/**
 * Closed-form TGK coefficient.
 *
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum FdStatus fd_kappa_tgk_closed_form(const struct FdSetup *setup, double *out);

/**
 * κ_ntz for n ≥ 2.
 *
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum FdStatus fd_kappa_ntz(const struct FdSetup *setup, size_t n, double *out);

/**
 * M(μ) for the setup.
 *
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum FdStatus fd_mu_potential(const struct FdSetup *setup, double mu, double *out);

/**
 * Default run parameters for `setup`.
 *
 * # Safety
 * `setup` must be a live handle; `out` must be writable.
 */
enum FdStatus fd_mc_params_default(const struct FdSetup *setup, struct FdMcParams *out);

/**
 * Run an ensemble.
 *
 * # Safety
 * `setup` and `params` must be valid; `out` must be writable.
 */
enum FdStatus fd_mc_run(const struct FdSetup *setup,
                        const struct FdMcParams *params,
                        struct FdEnsemble **out);

/**
 * # Safety
 * `ens` must come from `fd_mc_run` or be null.
 */
void fd_ensemble_free(struct FdEnsemble *ens);

/**
 * Number of snapshots, including t = 0; 0 for a null handle.
 *
 * # Safety
 * `ens` must be a live handle or null.
 */
size_t fd_ensemble_len(const struct FdEnsemble *ens);

/**
 * Time, mean displacement and variance at snapshot `k`.
 *
 * # Safety
 * `ens` must be a live handle; output pointers must be writable.
 */
enum FdStatus fd_ensemble_snapshot(const struct FdEnsemble *ens,
                                   size_t k,
                                   double *t,
                                   double *mean_dz,
                                   double *variance);

/**
 * κ_DV from the late-time variance slope.
 *
 * # Safety
 * `ens` must be a live handle; output pointers must be writable.
 */
enum FdStatus fd_ensemble_kappa_dv(const struct FdEnsemble *ens, double *value, double *std_error);

/**
 * κ_TGK from the velocity autocorrelation integral.
 *
 * # Safety
 * `ens` must be a live handle; output pointers must be writable.
 */
enum FdStatus fd_ensemble_kappa_tgk(const struct FdEnsemble *ens, double *value, double *std_error);

/**
 * Run a built-in DIO script on the canonical equation and report whether
 * the Fick coefficient changed and the displacement-variance one held.
 *
 * # Safety
 * `name` must be a NUL-terminated string; output pointers must be writable.
 */
enum FdStatus fd_dio_check(const char *name, bool *fick_changed, bool *dv_invariant);

/**
 * Number of built-in DIO scripts.
 */
size_t fd_dio_script_count(void);

/**
 * Copy the name of built-in script `index` into `buf` (NUL-terminated,
 * truncated to `len`). Writes the full name length to `needed`.
 *
 * # Safety
 * `buf` must hold `len` bytes (or be null with `len` 0); `needed` must be writable.
 */
enum FdStatus fd_dio_script_name(size_t index, char *buf, size_t len, size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FOCUS_DIFFUSION_H */
