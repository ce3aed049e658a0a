#ifndef PQMKZ_H
#define PQMKZ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum PqmkzStatus {
  PQMKZ_STATUS_OK = 0,
  PQMKZ_STATUS_NULL_POINTER = 1,
  PQMKZ_STATUS_INVALID_ARGUMENT = 2,
  PQMKZ_STATUS_SYNTAX = 3,
  PQMKZ_STATUS_DOMAIN = 4,
  PQMKZ_STATUS_PANIC = 5,
} PqmkzStatus;

/**
 * A parsed function of `x`.
 */
typedef struct PqmkzFunction PqmkzFunction;

/**
 * Operator `M_{n,p,q}` together with its truncation policy.
 */
typedef struct PqmkzOperator PqmkzOperator;

/**
 * Value of a truncated evaluation and its certificate.
 */
typedef struct PqmkzEvalOutcome {
  double value;
  double tail_mass;
  uintptr_t terms_used;
  double tail_bound;
  double rounding_bound;
  double error_bound;
  bool converged;
  bool heuristic_bound;
} PqmkzEvalOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an operator for `n` and `0 < q < p <= 1` with the default policy.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum PqmkzStatus pqmkz_operator_new(uint32_t n, double p, double q, struct PqmkzOperator **out);

/**
 * Creates the classical (`p = q = 1`) operator.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum PqmkzStatus pqmkz_operator_new_classical(uint32_t n, struct PqmkzOperator **out);

/**
 * Replaces the truncation policy. Pass a NaN `sup_bound` for none.
 *
 * # Safety
 * `op` must be a live handle from `pqmkz_operator_new*`.
 */
enum PqmkzStatus pqmkz_operator_set_policy(struct PqmkzOperator *op,
                                           double tail_tol,
                                           uintptr_t k_max,
                                           double sup_bound);

/**
 * Releases an operator; null is ignored.
 *
 * # Safety
 * `op` must be null or a live handle, not used afterwards.
 */
void pqmkz_operator_free(struct PqmkzOperator *op);

/**
 * Parses an expression in `x` or a preset name.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` valid for a pointer write.
 */
enum PqmkzStatus pqmkz_function_parse(const char *text, struct PqmkzFunction **out);

/**
 * Evaluates `f` at `x`.
 *
 * # Safety
 * `f` must be a live handle; `out` valid for a write.
 */
enum PqmkzStatus pqmkz_function_eval(const struct PqmkzFunction *f, double x, double *out);

/**
 * Releases a function; null is ignored.
 *
 * # Safety
 * `f` must be null or a live handle, not used afterwards.
 */
void pqmkz_function_free(struct PqmkzFunction *f);

/**
 * `M_{n,p,q}(f; x)` with its certificate.
 *
 * # Safety
 * Handles must be live; `out` valid for a write.
 */
enum PqmkzStatus pqmkz_evaluate(const struct PqmkzOperator *op,
                                const struct PqmkzFunction *f,
                                double x,
                                struct PqmkzEvalOutcome *out);

/**
 * Evaluates at `len` points. All points are attempted; the status is that of
 * the first failure, whose slot is left zeroed.
 *
 * # Safety
 * `xs` and `out` must point to `len` elements.
 */
enum PqmkzStatus pqmkz_evaluate_grid(const struct PqmkzOperator *op,
                                     const struct PqmkzFunction *f,
                                     const double *xs,
                                     uintptr_t len,
                                     struct PqmkzEvalOutcome *out);

/**
 * `M((t - x)^2; x)`.
 *
 * # Safety
 * `op` must be live; `out` valid for a write.
 */
enum PqmkzStatus pqmkz_central_second_moment(const struct PqmkzOperator *op, double x, double *out);

/**
 * `p^n/[n+1]_{p,q} x + (p - 1) x^2`; may be negative for `p < 1`.
 *
 * # Safety
 * `op` must be live; `out` valid for a write.
 */
enum PqmkzStatus pqmkz_delta_n_sq(const struct PqmkzOperator *op, double x, double *out);

/**
 * `[n]_{p,q}`.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum PqmkzStatus pqmkz_pq_int(uint64_t n, double p, double q, double *out);

/**
 * Gaussian `(p,q)`-binomial coefficient.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum PqmkzStatus pqmkz_pq_binomial(uint64_t n, uint64_t k, double p, double q, double *out);

/**
 * `2 omega(f, sqrt(p^n/[n+1]_{p,q}))` on a lattice of `resolution` points.
 *
 * # Safety
 * Handles must be live; `out` valid for a write.
 */
enum PqmkzStatus pqmkz_uniform_bound(const struct PqmkzOperator *op,
                                     const struct PqmkzFunction *f,
                                     uintptr_t resolution,
                                     double *out);

/**
 * Message for the last failing call on this thread, or an empty string.
 * The pointer stays valid until the next call on the same thread.
 */
const char *pqmkz_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pqmkz_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PQMKZ_H */
