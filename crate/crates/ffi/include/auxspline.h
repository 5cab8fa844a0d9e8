#ifndef AUXSPLINE_H
#define AUXSPLINE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AuxStatus {
  AUX_STATUS_OK = 0,
  AUX_STATUS_NULL_POINTER = 1,
  // Bad input or configuration.
  AUX_STATUS_INVALID_ARGUMENT = 2,
  // The sampler or a numerical routine failed.
  AUX_STATUS_NUMERICAL = 3,
  AUX_STATUS_BUFFER_TOO_SMALL = 4,
  AUX_STATUS_IO = 5,
  // A Rust panic was caught at the boundary.
  AUX_STATUS_PANIC = 6,
} AuxStatus;

// Curves available from a fit, all on the output grid.
typedef enum AuxCurve {
  AUX_CURVE_GRID = 0,
  AUX_CURVE_MAP = 1,
  AUX_CURVE_BMA = 2,
  AUX_CURVE_LOWER = 3,
  AUX_CURVE_UPPER = 4,
} AuxCurve;

// Opaque dataset handle.
typedef struct AuxDataset AuxDataset;

// Opaque handle to a finished fit.
typedef struct AuxFit AuxFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into the library from this thread.
const char *aux_last_error(void);

// Library version as a static NUL-terminated string.
const char *aux_version(void);

// Copies `n` covariate/response pairs into a new dataset.
//
// # Safety
// `x` and `y` must point to `n` readable values; `out` must be writable.
enum AuxStatus aux_dataset_new(const double *x, const double *y, size_t n, struct AuxDataset **out);

// Simulates one of the built-in examples (`sk1`, `dms2`, `dgk3`,
// `poisson`) with its default noise level.
//
// # Safety
// `example` must be a NUL-terminated string; `out` must be writable.
enum AuxStatus aux_dataset_simulate(const char *example,
                                    size_t n,
                                    uint64_t seed,
                                    struct AuxDataset **out);

// Number of observations, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle from this library.
size_t aux_dataset_len(const struct AuxDataset *ds);

// # Safety
// `ds` must be null or a live handle; it is invalid afterwards.
void aux_dataset_free(struct AuxDataset *ds);

// Runs the sampler on `ds`. `config_toml` holds a run configuration in
// the same TOML form the command line accepts; null means defaults.
//
// # Safety
// `ds` must be a live handle, `config_toml` null or NUL-terminated, `out`
// writable.
enum AuxStatus aux_fit(const struct AuxDataset *ds, const char *config_toml, struct AuxFit **out);

// # Safety
// `fit` must be null or a live handle; it is invalid afterwards.
void aux_fit_free(struct AuxFit *fit);

// Recorded samples, or 0 for a null handle.
//
// # Safety
// `fit` must be null or a live handle.
size_t aux_fit_samples(const struct AuxFit *fit);

// Active knot locations of the MAP state, ascending.
//
// # Safety
// `fit` must be a live handle; `buf` must hold `cap` values.
enum AuxStatus aux_fit_map_knots(const struct AuxFit *fit,
                                 double *buf,
                                 size_t cap,
                                 size_t *out_len);

// Log posterior of every recorded sample, in order.
//
// # Safety
// `fit` must be a live handle; `buf` must hold `cap` values.
enum AuxStatus aux_fit_log_posterior(const struct AuxFit *fit,
                                     double *buf,
                                     size_t cap,
                                     size_t *out_len);

// One curve on the output grid. Curves the configuration did not request
// give `InvalidArgument`.
//
// # Safety
// `fit` must be a live handle; `buf` must hold `cap` values.
enum AuxStatus aux_fit_curve(const struct AuxFit *fit,
                             enum AuxCurve which,
                             double *buf,
                             size_t cap,
                             size_t *out_len);

// Return level above the threshold for a GPD with scale `sigma` and shape
// `xi`, exceeded once every `years` on average.
//
// # Safety
// `out` must be writable.
enum AuxStatus aux_return_level(double sigma,
                                double xi,
                                double zeta_u,
                                double n_y,
                                double years,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUXSPLINE_H */
