#ifndef LUMPKIT_H
#define LUMPKIT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Values 1–3 match the CLI exit codes.
 */
typedef enum LkStatus {
  LK_OK = 0,
  LK_PARSE_ERROR = 1,
  LK_NUMERIC_ERROR = 2,
  LK_IO_ERROR = 3,
  LK_INVALID_ARGUMENT = 4,
  LK_NULL_POINTER = 5,
  LK_PANIC = 6,
} LkStatus;

/**
 * A spanning set of a model's Jacobian space.
 */
typedef struct LkBasis LkBasis;

/**
 * A lumping matrix with orthonormal rows.
 */
typedef struct LkLumping LkLumping;

/**
 * A parsed model.
 */
typedef struct LkModel LkModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library from the same thread.
 */
const char *lk_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lk_version(void);

/**
 * Parse model text.
 */
enum LkStatus lk_model_parse(const char *text, struct LkModel **out);

/**
 * Read and parse a model file.
 */
enum LkStatus lk_model_load(const char *path, struct LkModel **out);

void lk_model_free(struct LkModel *model);

/**
 * Number of state variables, 0 for a null handle.
 */
size_t lk_model_dim(const struct LkModel *model);

/**
 * Number of observable rows, 0 for a null handle.
 */
size_t lk_model_observable_count(const struct LkModel *model);

/**
 * `out[i] = f_i(x)`; both buffers have length `dim`.
 */
enum LkStatus lk_model_eval_drift(const struct LkModel *model,
                                  const double *x,
                                  size_t n,
                                  double *out);

/**
 * Jacobian at `x`, row-major into `out` of length `dim²`; row `i` is the
 * gradient of `f_i`.
 */
enum LkStatus lk_model_jacobian(const struct LkModel *model,
                                const double *x,
                                size_t n,
                                double *out);

/**
 * Random Jacobian sampling in the default box, stopping after
 * `confirmations` consecutive dependent samples.
 */
enum LkStatus lk_basis_sample(const struct LkModel *model,
                              uint64_t seed,
                              size_t confirmations,
                              struct LkBasis **out);

/**
 * Basis from Jacobians at `count` points given row-major (`count × dim`).
 */
enum LkStatus lk_basis_from_points(const struct LkModel *model,
                                   const double *points,
                                   size_t count,
                                   struct LkBasis **out);

size_t lk_basis_len(const struct LkBasis *basis);

void lk_basis_free(struct LkBasis *basis);

/**
 * Constrained lumping of `model`'s observables at tolerance `epsilon`.
 */
enum LkStatus lk_lump(const struct LkModel *model,
                      const struct LkBasis *basis,
                      double epsilon,
                      struct LkLumping **out);

/**
 * Smallest tolerance at which the lumping is the observable span.
 */
enum LkStatus lk_epsilon_max(const struct LkModel *model, const struct LkBasis *basis, double *out);

/**
 * Bisection for the tolerance at which the size first drops to `cutoff`.
 * `epsilon_out` and `iterations_out` may be null.
 */
enum LkStatus lk_find_epsilon(const struct LkModel *model,
                              const struct LkBasis *basis,
                              size_t cutoff,
                              double d_min,
                              struct LkLumping **out,
                              double *epsilon_out,
                              size_t *iterations_out);

/**
 * Number of rows, 0 for a null handle.
 */
size_t lk_lumping_size(const struct LkLumping *lumping);

/**
 * Number of columns (the model dimension), 0 for a null handle.
 */
size_t lk_lumping_cols(const struct LkLumping *lumping);

/**
 * Tolerance the lumping was computed with, NaN for a null handle.
 */
double lk_lumping_epsilon(const struct LkLumping *lumping);

/**
 * Copy the rows into `out`, row-major; `len` must equal `size × cols`.
 */
enum LkStatus lk_lumping_copy_rows(const struct LkLumping *lumping, double *out, size_t len);

void lk_lumping_free(struct LkLumping *lumping);

/**
 * `‖L f(LᵀL x) − L f(x)‖` at `x` of length `dim`.
 */
enum LkStatus lk_deviation(const struct LkModel *model,
                           const struct LkLumping *lumping,
                           const double *x,
                           size_t n,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LUMPKIT_H */
