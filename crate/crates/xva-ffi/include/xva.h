#ifndef XVA_H
#define XVA_H

/* Generated by cbindgen from xva-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every API call.
 */
typedef enum XvaStatus {
  XVA_STATUS_OK = 0,
  XVA_STATUS_NULL_ARGUMENT = 1,
  XVA_STATUS_INVALID_INPUT = 2,
  XVA_STATUS_NUMERICAL_ERROR = 3,
  XVA_STATUS_PRECONDITION_NOT_MET = 4,
  XVA_STATUS_OUT_OF_RANGE = 5,
  XVA_STATUS_VALIDATION_FAILED = 6,
} XvaStatus;

/**
 * Trade side selector for lattice solves.
 */
typedef enum XvaSide {
  XVA_SIDE_SELLER = 0,
  XVA_SIDE_BUYER = 1,
} XvaSide;

/**
 * Opaque scenario handle: parsed configuration plus derived market and
 * claim data.
 */
typedef struct XvaScenario XvaScenario;

/**
 * Opaque solved-lattice handle.
 */
typedef struct XvaSolution XvaSolution;

/**
 * Valuation adjustment split into its four legs.
 */
typedef struct XvaBreakdown {
  double total;
  double funding_leg;
  double dva_leg;
  double cva_leg;
  double collateral_leg;
  double adjustment_factor;
  double vhat;
} XvaBreakdown;

/**
 * Replicating portfolio positions.
 */
typedef struct XvaHedge {
  double xi_stock;
  double xi_bond_i;
  double xi_bond_c;
  double psi_repo;
  double xi_funding;
  double psi_collateral;
} XvaHedge;

/**
 * Buyer/seller values and the no-arbitrage interval.
 */
typedef struct XvaInterval {
  double v0_minus;
  double v0_plus;
  double xva_buy;
  double xva_sell;
  double width;
  double vhat;
  double grid_error;
} XvaInterval;

/**
 * Monte Carlo point estimate.
 */
typedef struct XvaMcEstimate {
  double value;
  double std_error;
  uint64_t n_effective;
} XvaMcEstimate;

/**
 * Per-leg Monte Carlo estimates.
 */
typedef struct XvaMcBreakdown {
  struct XvaMcEstimate funding;
  struct XvaMcEstimate dva;
  struct XvaMcEstimate cva;
  struct XvaMcEstimate collateral;
  struct XvaMcEstimate total;
  double vhat;
} XvaMcBreakdown;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *xva_version(void);

/**
 * Copies the last error message of this thread into `buffer` (truncated to
 * `length` bytes including the terminator) and returns the full message
 * length. Safe to call with a null buffer to query the length.
 *
 * # Safety
 * `buffer`, when non-null, must point to at least `length` writable bytes.
 */
size_t xva_last_error(char *buffer, size_t length);

/**
 * Parses a scenario JSON document into an opaque handle.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` must be a valid
 * pointer. On success the handle must be released with
 * [`xva_scenario_free`].
 */
enum XvaStatus xva_scenario_parse(const char *json, struct XvaScenario **out);

/**
 * Releases a scenario handle. Null is ignored.
 *
 * # Safety
 * `scenario` must be null or a pointer obtained from
 * [`xva_scenario_parse`] that has not been freed yet.
 */
void xva_scenario_free(struct XvaScenario *scenario);

/**
 * Runs the no-arbitrage rate checks. Returns `Ok` when every condition
 * holds, `ValidationFailed` with the violation list in the error buffer
 * otherwise.
 *
 * # Safety
 * `scenario` must be a live handle from [`xva_scenario_parse`].
 */
enum XvaStatus xva_scenario_validate(const struct XvaScenario *scenario);

/**
 * Equal-rates closed form at inception (defaults formula when a credit
 * block is present).
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be a valid pointer.
 */
enum XvaStatus xva_price_closed_form(const struct XvaScenario *scenario, struct XvaBreakdown *out);

/**
 * Closed-form replicating positions at inception.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be a valid pointer.
 */
enum XvaStatus xva_hedge_closed_form(const struct XvaScenario *scenario, struct XvaHedge *out);

/**
 * Solves the backward equation on the lattice for one side of the trade.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be a valid pointer. On
 * success the handle must be released with [`xva_solution_free`].
 */
enum XvaStatus xva_solve(const struct XvaScenario *scenario,
                         enum XvaSide side,
                         struct XvaSolution **out);

/**
 * Releases a solution handle. Null is ignored.
 *
 * # Safety
 * `solution` must be null or a pointer obtained from [`xva_solve`] that has
 * not been freed yet.
 */
void xva_solution_free(struct XvaSolution *solution);

/**
 * Reads the pre-default value surface at `(t, s)`.
 *
 * # Safety
 * `solution` must be a live handle from [`xva_solve`]; `out` must be valid.
 */
enum XvaStatus xva_solution_value_at(const struct XvaSolution *solution,
                                     double t,
                                     double s,
                                     double *out);

/**
 * Extracts the replicating positions from a solved lattice at `(t, s)`.
 *
 * # Safety
 * `solution` must be a live handle from [`xva_solve`]; `out` must be valid.
 */
enum XvaStatus xva_solution_hedge_at(const struct XvaSolution *solution,
                                     double t,
                                     double s,
                                     struct XvaHedge *out);

/**
 * Buyer/seller lattice solves assembled into the no-arbitrage interval.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be a valid pointer.
 */
enum XvaStatus xva_interval(const struct XvaScenario *scenario, struct XvaInterval *out);

/**
 * Monte Carlo evaluation of the default-risky representation with the
 * scenario's `mc` settings.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be a valid pointer.
 */
enum XvaStatus xva_price_mc(const struct XvaScenario *scenario, struct XvaMcBreakdown *out);

/**
 * Relative tolerance used by the engine cross-checks; exported so bindings
 * can apply the same acceptance band.
 */
double xva_crosscheck_rel_tol(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XVA_H */
