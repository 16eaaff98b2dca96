#ifndef TRADEOFF_H
#define TRADEOFF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TradeoffStatus {
  TRADEOFF_STATUS_OK = 0,
  TRADEOFF_STATUS_INVALID_PARAMETER = 1,
  TRADEOFF_STATUS_BUDGET_EXHAUSTED = 2,
  TRADEOFF_STATUS_UNKNOWN_GROUP = 3,
  TRADEOFF_STATUS_EMPTY_GROUP = 4,
  TRADEOFF_STATUS_DEGENERATE_LABELS = 5,
  TRADEOFF_STATUS_LENGTH_MISMATCH = 6,
  TRADEOFF_STATUS_BOTH_LIKELIHOODS_ZERO = 7,
  TRADEOFF_STATUS_INFEASIBLE = 8,
  TRADEOFF_STATUS_NON_FINITE = 9,
  TRADEOFF_STATUS_EMPTY_INPUT = 10,
  TRADEOFF_STATUS_DATASET = 11,
  TRADEOFF_STATUS_IO = 12,
  TRADEOFF_STATUS_JSON = 13,
  TRADEOFF_STATUS_NULL_POINTER = 14,
  TRADEOFF_STATUS_INVALID_UTF8 = 15,
  TRADEOFF_STATUS_PANIC = 16,
} TradeoffStatus;

/**
 * Privacy ledger under basic composition.
 */
typedef struct TradeoffLedger TradeoffLedger;

/**
 * Seeded ChaCha random stream.
 */
typedef struct TradeoffRng TradeoffRng;

/**
 * Mirror of the core bound constants; both are 1 by default.
 */
typedef struct TradeoffBoundConstants {
  double c_utility;
  double c_fairness;
} TradeoffBoundConstants;

/**
 * Mirror of the core feasibility spec.
 */
typedef struct TradeoffFeasibilitySpec {
  double u0;
  double u_threshold;
  double f_target;
  uint64_t d;
  double p;
} TradeoffFeasibilitySpec;

/**
 * Mirror of the core trade-off point.
 */
typedef struct TradeoffPoint {
  double epsilon;
  double utility;
  double fairness_violation;
  uint64_t n;
  double p;
  uint64_t d;
} TradeoffPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null if none. Valid until
 * the next failing call on the same thread.
 */
const char *tradeoff_last_error(void);

/**
 * Static name of a status code.
 */
const char *tradeoff_status_name(enum TradeoffStatus status);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void tradeoff_string_free(char *s);

struct TradeoffRng *tradeoff_rng_new(uint64_t seed);

/**
 * # Safety
 * `rng` must be null or a handle from [`tradeoff_rng_new`] not yet freed.
 */
void tradeoff_rng_free(struct TradeoffRng *rng);

/**
 * # Safety
 * `rng` must be a live handle; `out` must be valid for writing.
 */
enum TradeoffStatus tradeoff_laplace_mechanism(struct TradeoffRng *rng,
                                               double true_answer,
                                               double sensitivity,
                                               double epsilon,
                                               double *out);

/**
 * # Safety
 * `rng` must be a live handle; `out` must be valid for writing.
 */
enum TradeoffStatus tradeoff_gaussian_mechanism(struct TradeoffRng *rng,
                                                double true_answer,
                                                double sensitivity,
                                                double epsilon,
                                                double delta,
                                                double *out);

/**
 * # Safety
 * `out` must be valid for writing.
 */
enum TradeoffStatus tradeoff_gaussian_sigma(double epsilon,
                                            double delta,
                                            double sensitivity,
                                            double *out);

/**
 * Picks an index into `utilities` with the exponential mechanism.
 *
 * # Safety
 * `rng` must be a live handle, `utilities` must hold `len` values and
 * `out_index` must be valid for writing.
 */
enum TradeoffStatus tradeoff_exponential_mechanism(struct TradeoffRng *rng,
                                                   const double *utilities,
                                                   size_t len,
                                                   double delta_u,
                                                   double epsilon,
                                                   size_t *out_index);

/**
 * Creates an empty ledger with the given cap.
 *
 * # Safety
 * `out` must be valid for writing.
 */
enum TradeoffStatus tradeoff_ledger_new(double cap_epsilon,
                                        double cap_delta,
                                        struct TradeoffLedger **out);

/**
 * Parses a ledger from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writing.
 */
enum TradeoffStatus tradeoff_ledger_from_json(const char *json, struct TradeoffLedger **out);

/**
 * # Safety
 * `ledger` must be null or a live handle.
 */
void tradeoff_ledger_free(struct TradeoffLedger *ledger);

/**
 * Records a charge. On failure (including `BudgetExhausted`) the ledger is
 * left unchanged.
 *
 * # Safety
 * `ledger` must be a live handle; `label` must be null or a NUL-terminated
 * string.
 */
enum TradeoffStatus tradeoff_ledger_charge(struct TradeoffLedger *ledger,
                                           double epsilon,
                                           double delta,
                                           const char *label);

/**
 * # Safety
 * `ledger` must be a live handle; the out-pointers must be valid for writing.
 */
enum TradeoffStatus tradeoff_ledger_spent(const struct TradeoffLedger *ledger,
                                          double *out_epsilon,
                                          double *out_delta);

/**
 * Serialises the ledger; free the string with [`tradeoff_string_free`].
 *
 * # Safety
 * `ledger` must be a live handle; `out` must be valid for writing.
 */
enum TradeoffStatus tradeoff_ledger_to_json(const struct TradeoffLedger *ledger, char **out);

/**
 * # Safety
 * `out` must be valid for writing.
 */
enum TradeoffStatus tradeoff_utility_bound(double u0,
                                           double d,
                                           double epsilon,
                                           double n,
                                           struct TradeoffBoundConstants consts,
                                           double *out);

/**
 * # Safety
 * `out` must be valid for writing.
 */
enum TradeoffStatus tradeoff_fairness_bound(double epsilon,
                                            double n,
                                            double p,
                                            struct TradeoffBoundConstants consts,
                                            double *out);

/**
 * # Safety
 * `out` must be valid for writing.
 */
enum TradeoffStatus tradeoff_group_noise_se(double n_a, double epsilon, double *out);

/**
 * # Safety
 * `out` must be valid for writing.
 */
enum TradeoffStatus tradeoff_feasible(struct TradeoffFeasibilitySpec spec,
                                      double epsilon,
                                      double n,
                                      struct TradeoffBoundConstants consts,
                                      bool *out);

/**
 * # Safety
 * `out` must be valid for writing.
 */
enum TradeoffStatus tradeoff_critical_sample_size(struct TradeoffFeasibilitySpec spec,
                                                  double epsilon,
                                                  struct TradeoffBoundConstants consts,
                                                  double *out);

/**
 * Writes `true` into `out_mask[i]` when `points[i]` is nondominated.
 *
 * # Safety
 * `points` must hold `len` points and `out_mask` room for `len` flags.
 */
enum TradeoffStatus tradeoff_pareto_mask(const struct TradeoffPoint *points,
                                         size_t len,
                                         bool *out_mask);

/**
 * # Safety
 * `out` must be valid for writing.
 */
enum TradeoffStatus tradeoff_membership_posterior(double prior,
                                                  double likelihood_in,
                                                  double likelihood_out,
                                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRADEOFF_H */
