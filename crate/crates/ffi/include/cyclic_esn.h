#ifndef CYCLIC_ESN_H
#define CYCLIC_ESN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum CesnStatus {
  CESN_STATUS_OK = 0,
  CESN_STATUS_NULL_POINTER = 1,
  CESN_STATUS_INVALID_PARAMETER = 2,
  CESN_STATUS_DIVERGED = 3,
  CESN_STATUS_DEGENERATE_SERIES = 4,
  CESN_STATUS_DOMAIN = 5,
  CESN_STATUS_INSUFFICIENT_COVERAGE = 6,
  CESN_STATUS_SINGULAR_SYSTEM = 7,
  CESN_STATUS_SHAPE = 8,
  CESN_STATUS_ILL_CONDITIONED = 9,
  CESN_STATUS_OPTIMIZATION_FAILED = 10,
  CESN_STATUS_CONFIG = 11,
  CESN_STATUS_IO = 12,
  CESN_STATUS_PARSE = 13,
  CESN_STATUS_BOUNDS = 14,
  CESN_STATUS_NOT_FITTED = 15,
  CESN_STATUS_BUFFER_TOO_SMALL = 16,
  CESN_STATUS_PANIC = 99,
} CesnStatus;

// Opaque reservoir with an optional fitted readout.
typedef struct CesnModel CesnModel;

// SCR hyperparameters.
typedef struct CesnParams {
  size_t n_nodes;
  double w_in;
  double w;
  double lambda;
} CesnParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string. The
// pointer stays valid until the next call into this library on the same
// thread.
const char *cesn_last_error_message(void);

// Builds a reservoir. `*out` receives a handle to release with
// `cesn_model_free`.
//
// # Safety
// `params` must point to a valid `CesnParams`; `out` must be writable.
enum CesnStatus cesn_model_new(const struct CesnParams *params, struct CesnModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from `cesn_model_new` and not be used afterwards.
void cesn_model_free(struct CesnModel *model);

// Fits the readout on steps `washout..len`, running the reservoir from the
// zero state.
//
// # Safety
// `inputs` and `targets` must hold `len` doubles.
enum CesnStatus cesn_model_fit(struct CesnModel *model,
                               const double *inputs,
                               const double *targets,
                               size_t len,
                               size_t washout);

// Writes `len` predictions for `inputs`, running from the zero state.
//
// # Safety
// `inputs` and `out` must hold `len` doubles.
enum CesnStatus cesn_model_predict(const struct CesnModel *model,
                                   const double *inputs,
                                   size_t len,
                                   double *out);

// Copies the readout weights (bias first, `n_nodes + 1` values) into `out`.
// `*written` receives the number of weights, also when `capacity` is too
// small.
//
// # Safety
// `out` must hold `capacity` doubles; `written` must be writable.
enum CesnStatus cesn_model_readout(const struct CesnModel *model,
                                   double *out,
                                   size_t capacity,
                                   size_t *written);

// K-fold cross-validated squared error of `params` on one task.
//
// # Safety
// `inputs` and `targets` must hold `len` doubles; `out` must be writable.
enum CesnStatus cesn_cv_objective(const struct CesnParams *params,
                                  const double *inputs,
                                  const double *targets,
                                  size_t len,
                                  size_t k_folds,
                                  size_t washout,
                                  double *out);

// Normalised mean squared error.
//
// # Safety
// `targets` and `predictions` must hold `len` doubles; `out` must be
// writable.
enum CesnStatus cesn_nmse(const double *targets,
                          const double *predictions,
                          size_t len,
                          double *out);

// Mackey-Glass series of `n` unit-spaced samples.
//
// # Safety
// `out` must hold `n` doubles.
enum CesnStatus cesn_gen_mackey_glass(double tau,
                                      size_t n,
                                      double noise,
                                      uint64_t seed,
                                      double *out);

// NARMA inputs and targets of length `n`.
//
// # Safety
// `inputs_out` and `targets_out` must hold `n` doubles.
enum CesnStatus cesn_gen_narma(size_t order,
                               size_t n,
                               uint64_t seed,
                               double *inputs_out,
                               double *targets_out);

// Bayesian optimisation of SCR hyperparameters on one task, with LCB
// kappa 2 and convergence radius 1e-3. `target` stops early once reached;
// pass NaN to disable.
//
// # Safety
// `inputs` and `targets` must hold `len` doubles; the output pointers must
// be writable.
enum CesnStatus cesn_optimize(const double *inputs,
                              const double *targets,
                              size_t len,
                              size_t k_folds,
                              size_t washout,
                              size_t n_init,
                              size_t max_evals,
                              double target,
                              uint64_t seed,
                              struct CesnParams *best_out,
                              double *best_value_out,
                              size_t *evals_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CYCLIC_ESN_H */
