#ifndef CPGD_H
#define CPGD_H

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum CpgdRadiusMode {
  // Infinite for injective forward matrices, else the norm of the samples.
  CPGD_RADIUS_MODE_AUTO = 0,
  CPGD_RADIUS_MODE_INFINITE = 1,
  // Use `CpgdOptions::radius`.
  CPGD_RADIUS_MODE_FINITE = 2,
} CpgdRadiusMode;

typedef enum CpgdStoppingRule {
  CPGD_STOPPING_RULE_NORM_CHANGE = 0,
  CPGD_STOPPING_RULE_ITERATE_CHANGE = 1,
} CpgdStoppingRule;

typedef enum CpgdStatus {
  CPGD_STATUS_OK = 0,
  CPGD_STATUS_NULL_POINTER = 1,
  CPGD_STATUS_INVALID_ARGUMENT = 2,
  CPGD_STATUS_DIMENSION = 3,
  CPGD_STATUS_NOT_INJECTIVE = 4,
  CPGD_STATUS_NO_CONVERGENCE = 5,
  CPGD_STATUS_NON_FINITE = 6,
  CPGD_STATUS_DEGENERATE_FILTER = 7,
  CPGD_STATUS_LINALG = 8,
  CPGD_STATUS_BUFFER_TOO_SMALL = 9,
  CPGD_STATUS_IO = 10,
  CPGD_STATUS_PANIC = 11,
} CpgdStatus;

typedef enum CpgdMethod {
  CPGD_METHOD_CPGD = 0,
  CPGD_METHOD_GENFRI = 1,
  CPGD_METHOD_LS_CADZOW = 2,
} CpgdMethod;

// Opaque forward model: a forward matrix and its observations.
typedef struct CpgdModel CpgdModel;

// Opaque recovery result.
typedef struct CpgdTrace CpgdTrace;

// Solver settings; obtain defaults from `cpgd_options_default`.
typedef struct CpgdOptions {
  // Number of Diracs K.
  size_t rank;
  // Embedding order P; 0 selects P = M.
  size_t order;
  // Gradient step; 0 or negative selects 1/beta.
  double step;
  enum CpgdRadiusMode radius_mode;
  double radius;
  size_t map_iterations;
  size_t max_iter;
  double rel_tol;
  enum CpgdStoppingRule stopping;
  // Seed of the GenFRI initialisations.
  uint64_t seed;
} CpgdOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Default solver settings for `rank` Diracs.
struct CpgdOptions cpgd_options_default(size_t rank);

// Model for `samples` samples at `times` (fractions of the period) of a
// stream with half-bandwidth `half_bandwidth`, observed as `y_re + i y_im`.
//
// # Safety
// `times`, `y_re` and `y_im` must each point to `samples` readable doubles;
// `out` must be writable. The handle written to `out` is freed with
// `cpgd_model_free`.
enum CpgdStatus cpgd_model_from_samples(const double *times,
                                        const double *y_re,
                                        const double *y_im,
                                        size_t samples,
                                        size_t half_bandwidth,
                                        struct CpgdModel **out);

// Model for an explicit `rows x cols` forward matrix given row-major.
//
// # Safety
// `g_re` and `g_im` must point to `rows * cols` readable doubles, `y_re` and
// `y_im` to `rows`; `out` must be writable.
enum CpgdStatus cpgd_model_from_matrix(const double *g_re,
                                       const double *g_im,
                                       size_t rows,
                                       size_t cols,
                                       const double *y_re,
                                       const double *y_im,
                                       struct CpgdModel **out);

// # Safety
// `model` must be null or a handle from a `cpgd_model_from_*` call that has
// not been freed.
void cpgd_model_free(struct CpgdModel *model);

// Number of samples L, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live model handle.
size_t cpgd_model_samples(const struct CpgdModel *model);

// Number of Fourier coefficients N = 2M + 1, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live model handle.
size_t cpgd_model_coefficients(const struct CpgdModel *model);

// Whether the forward matrix is injective, as required by GenFRI.
//
// # Safety
// `model` must be a live model handle and `out` writable.
enum CpgdStatus cpgd_model_is_injective(const struct CpgdModel *model, bool *out);

// Runs `method` on `model`. Not reaching the tolerance within `max_iter`
// iterations is not an error; check `cpgd_trace_converged`.
//
// # Safety
// `model` must be a live model handle, `options` readable and `out`
// writable.
// The handle written to `out` is freed with `cpgd_trace_free`.
enum CpgdStatus cpgd_recover(const struct CpgdModel *model,
                             enum CpgdMethod method,
                             const struct CpgdOptions *options,
                             struct CpgdTrace **out);

// # Safety
// `trace` must be null or a handle from `cpgd_recover` that has not been freed.
void cpgd_trace_free(struct CpgdTrace *trace);

// Number of recovered coefficients, or 0 for a null handle.
//
// # Safety
// `trace` must be null or a live trace handle.
size_t cpgd_trace_length(const struct CpgdTrace *trace);

// Iterations performed, or 0 for a null handle.
//
// # Safety
// `trace` must be null or a live trace handle.
size_t cpgd_trace_iterations(const struct CpgdTrace *trace);

// # Safety
// `trace` must be null or a live trace handle.
bool cpgd_trace_converged(const struct CpgdTrace *trace);

// Final data residual `||G x - y||`, NaN for a null handle.
//
// # Safety
// `trace` must be null or a live trace handle.
double cpgd_trace_residual(const struct CpgdTrace *trace);

// Step size used by CPGD, NaN for other methods or a null handle.
//
// # Safety
// `trace` must be null or a live trace handle.
double cpgd_trace_step(const struct CpgdTrace *trace);

// `beta = 2 sigma_max(G)^2` used by CPGD, NaN for other methods or a null handle.
//
// # Safety
// `trace` must be null or a live trace handle.
double cpgd_trace_beta(const struct CpgdTrace *trace);

// Copies the recovered coefficients, ordered m = -M..=M.
//
// # Safety
// `trace` must be a live trace handle; `re` and `im` must each hold `len`
// writable doubles.
enum CpgdStatus cpgd_trace_coefficients(const struct CpgdTrace *trace,
                                        double *re,
                                        double *im,
                                        size_t len);

// Writes the `rank` Dirac locations found from the recovered coefficients,
// sorted ascending. `order` 0 selects P = M.
//
// # Safety
// `trace` must be a live trace handle and `locations` hold `len` writable doubles.
enum CpgdStatus cpgd_trace_locations(const struct CpgdTrace *trace,
                                     size_t rank,
                                     size_t order,
                                     double *locations,
                                     size_t len);

// Mean circular distance between `truth` and `estimate` under the optimal
// matching, as a fraction of the period.
//
// # Safety
// `truth` and `estimate` must each point to `count` readable doubles and
// `out` must be writable.
enum CpgdStatus cpgd_positioning_error(const double *truth,
                                       const double *estimate,
                                       size_t count,
                                       double *out);

// Copies the last error message of the calling thread into `buffer`,
// truncated and NUL-terminated. Returns the full message length in bytes,
// excluding the terminator; 0 means no error.
//
// # Safety
// `buffer` must be null or hold `len` writable bytes.
size_t cpgd_last_error_message(char *buffer, size_t len);

// Library version as a static NUL-terminated string.
const char *cpgd_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPGD_H */
