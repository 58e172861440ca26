#ifndef OPTSTOP_H
#define OPTSTOP_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OptstopStatus {
  OPTSTOP_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  OPTSTOP_STATUS_NULL_POINTER = 1,
  OPTSTOP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Input data was rejected (unsorted support, bad weights, ...).
   */
  OPTSTOP_STATUS_DATA = 3,
  /**
   * The requested target has zero probability.
   */
  OPTSTOP_STATUS_UNREACHABLE = 4,
  OPTSTOP_STATUS_SESSION_CLOSED = 5,
  /**
   * The optimality equation has no solution.
   */
  OPTSTOP_STATUS_NO_SOLUTION = 6,
  OPTSTOP_STATUS_PANIC = 99,
} OptstopStatus;

typedef enum OptstopPolicy {
  OPTSTOP_POLICY_GAUSSIAN_ML = 0,
  OPTSTOP_POLICY_BAYES_DIRICHLET = 1,
} OptstopPolicy;

/**
 * Discrete energy distribution.
 */
typedef struct OptstopDistribution OptstopDistribution;

/**
 * Ising instance with integer couplings.
 */
typedef struct OptstopInstance OptstopInstance;

/**
 * Online stopping session.
 */
typedef struct OptstopSession OptstopSession;

/**
 * Optimal cost and its split into energy and effort.
 */
typedef struct OptstopSolution {
  double optimal_cost;
  double mean_stop_step;
  double optimal_energy;
  double optimal_effort;
} OptstopSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *optstop_version(void);

/**
 * Message of the last failed call on this thread, or an empty string.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *optstop_last_error_message(void);

/**
 * Distribution from a strictly increasing support and matching weights.
 *
 * # Safety
 * `support` and `weights` must point to `len` readable doubles; `out` must
 * be writable.
 */
enum OptstopStatus optstop_distribution_new(const double *support,
                                            const double *weights,
                                            size_t len,
                                            struct OptstopDistribution **out);

/**
 * Empirical distribution of `len` samples.
 *
 * # Safety
 * `samples` must point to `len` readable doubles; `out` must be writable.
 */
enum OptstopStatus optstop_distribution_from_samples(const double *samples,
                                                     size_t len,
                                                     struct OptstopDistribution **out);

/**
 * # Safety
 * `d` must come from this library and not be used afterwards. Null is a no-op.
 */
void optstop_distribution_free(struct OptstopDistribution *d);

/**
 * Number of support points.
 *
 * # Safety
 * `d` must be a live handle and `out` writable.
 */
enum OptstopStatus optstop_distribution_len(const struct OptstopDistribution *d, size_t *out);

/**
 * `P(e <= x)`.
 *
 * # Safety
 * `d` must be a live handle and `out` writable.
 */
enum OptstopStatus optstop_distribution_cdf(const struct OptstopDistribution *d,
                                            double x,
                                            double *out);

/**
 * `E[(level - e)^+]`.
 *
 * # Safety
 * `d` must be a live handle and `out` writable.
 */
enum OptstopStatus optstop_distribution_partial_expectation(const struct OptstopDistribution *d,
                                                            double level,
                                                            double *out);

/**
 * # Safety
 * `d` must be a live handle and `out` writable.
 */
enum OptstopStatus optstop_distribution_mean(const struct OptstopDistribution *d, double *out);

/**
 * Optimal total cost at `unit_cost` per unit time and `run_time` per run.
 *
 * # Safety
 * `d` must be a live handle and `out` writable.
 */
enum OptstopStatus optstop_solve(const struct OptstopDistribution *d,
                                 double unit_cost,
                                 double run_time,
                                 struct OptstopSolution *out);

/**
 * Distribution of the best of `n_cpu` independent draws; a new handle.
 *
 * # Safety
 * `d` must be a live handle and `out` writable.
 */
enum OptstopStatus optstop_embarrassing_transform(const struct OptstopDistribution *d,
                                                  uint64_t n_cpu,
                                                  struct OptstopDistribution **out);

/**
 * Expected time to reach a target of per-run probability `p` with
 * confidence `confidence`.
 *
 * # Safety
 * `out` must be writable.
 */
enum OptstopStatus optstop_time_to_target(double p,
                                          double confidence,
                                          double run_time,
                                          double *out);

/**
 * Complete-graph instance with couplings drawn uniformly from `±{1..10}`.
 *
 * # Safety
 * `out` must be writable.
 */
enum OptstopStatus optstop_instance_generate(size_t num_vars,
                                             uint64_t seed,
                                             struct OptstopInstance **out);

/**
 * # Safety
 * `inst` must come from this library and not be used afterwards. Null is a no-op.
 */
void optstop_instance_free(struct OptstopInstance *inst);

/**
 * # Safety
 * `inst` must be a live handle and `out` writable.
 */
enum OptstopStatus optstop_instance_num_vars(const struct OptstopInstance *inst, size_t *out);

/**
 * Final energies of `n_runs` annealing runs, written to `energies`.
 *
 * Run `i` uses a seed derived from `seed` and `i`; the result does not
 * depend on `workers`.
 *
 * # Safety
 * `inst` must be a live handle and `energies` must have room for `n_runs`
 * doubles.
 */
enum OptstopStatus optstop_sa_sample(const struct OptstopInstance *inst,
                                     double t_init,
                                     double t_fin,
                                     uint64_t n_sweeps,
                                     uint64_t n_runs,
                                     uint64_t seed,
                                     size_t workers,
                                     double *energies);

/**
 * New session with default burn-in, tail and override settings.
 *
 * `prior` may be null. Otherwise it seeds the Dirichlet posterior of the
 * Bayesian policy with concentrations `prior_strength·weights`; the
 * Gaussian policy ignores it.
 *
 * # Safety
 * `prior` must be null or a live handle; `out` must be writable.
 */
enum OptstopStatus optstop_session_new(enum OptstopPolicy policy,
                                       double unit_cost,
                                       double run_time,
                                       const struct OptstopDistribution *prior,
                                       double prior_strength,
                                       struct OptstopSession **out);

/**
 * Feeds one energy. `should_stop` is set to 1 when the session stops.
 *
 * # Safety
 * `s` must be a live handle and `should_stop` writable.
 */
enum OptstopStatus optstop_session_observe(struct OptstopSession *s,
                                           double energy,
                                           bool *should_stop);

/**
 * Current stopping threshold. `has_target` is 0 while none is available.
 *
 * # Safety
 * `s` must be a live handle; `target` and `has_target` writable.
 */
enum OptstopStatus optstop_session_target(const struct OptstopSession *s,
                                          double *target,
                                          bool *has_target);

/**
 * Best energy plus accumulated cost. Fails before the first observation.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum OptstopStatus optstop_session_realized_cost(const struct OptstopSession *s, double *out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is a no-op.
 */
void optstop_session_free(struct OptstopSession *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPTSTOP_H */
