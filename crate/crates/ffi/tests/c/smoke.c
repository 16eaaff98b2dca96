#include <math.h>
#include <stdio.h>
#include <string.h>

#include "tradeoff.h"

#define CHECK(cond)                                                  \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "check failed at line %d: %s\n", __LINE__, #cond); \
      return 1;                                                      \
    }                                                                \
  } while (0)

int main(void) {
  TradeoffRng *rng = tradeoff_rng_new(42);
  double noisy = 0.0;
  CHECK(tradeoff_laplace_mechanism(rng, 100.0, 1.0, 1.0, &noisy) == TRADEOFF_STATUS_OK);
  CHECK(isfinite(noisy));
  CHECK(tradeoff_laplace_mechanism(rng, 100.0, 1.0, -1.0, &noisy) == TRADEOFF_STATUS_INVALID_PARAMETER);
  CHECK(strncmp(tradeoff_last_error(), "InvalidParameter", 16) == 0);
  tradeoff_rng_free(rng);

  TradeoffLedger *ledger = NULL;
  CHECK(tradeoff_ledger_new(1.0, 0.0, &ledger) == TRADEOFF_STATUS_OK);
  CHECK(tradeoff_ledger_charge(ledger, 0.3, 0.0, "a") == TRADEOFF_STATUS_OK);
  CHECK(tradeoff_ledger_charge(ledger, 0.7, 0.0, "b") == TRADEOFF_STATUS_OK);
  CHECK(tradeoff_ledger_charge(ledger, 0.1, 0.0, "c") == TRADEOFF_STATUS_BUDGET_EXHAUSTED);
  double eps = 0.0, delta = 0.0;
  CHECK(tradeoff_ledger_spent(ledger, &eps, &delta) == TRADEOFF_STATUS_OK);
  CHECK(fabs(eps - 1.0) < 1e-12);
  char *json = NULL;
  CHECK(tradeoff_ledger_to_json(ledger, &json) == TRADEOFF_STATUS_OK);
  CHECK(strstr(json, "\"entries\"") != NULL);
  tradeoff_string_free(json);
  tradeoff_ledger_free(ledger);

  TradeoffFeasibilitySpec spec = {1.5, 0.5, 0.05, 1, 0.1};
  TradeoffBoundConstants consts = {1.0, 1.0};
  double n_star = 0.0;
  CHECK(tradeoff_critical_sample_size(spec, 1.0, consts, &n_star) == TRADEOFF_STATUS_OK);
  CHECK(fabs(n_star - 4000.0) < 1e-6);

  double post = 0.0;
  CHECK(tradeoff_membership_posterior(0.5, 0.0, 0.0, &post) == TRADEOFF_STATUS_BOTH_LIKELIHOODS_ZERO);
  printf("ok\n");
  return 0;
}
