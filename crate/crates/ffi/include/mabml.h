#ifndef MABML_H
#define MABML_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Policy selector for simulation.
 */
typedef enum {
  MABML_POLICY_INDEX = 0,
  MABML_POLICY_MAI = 1,
  MABML_POLICY_GREEDY = 2,
  MABML_POLICY_RANDOM = 3,
} MabmlPolicy;

/**
 * Status codes returned by every fallible call.
 */
typedef enum {
  MABML_STATUS_OK = 0,
  MABML_STATUS_NULL_ARGUMENT = 1,
  MABML_STATUS_UNKNOWN_CASE = 2,
  MABML_STATUS_INVALID_INSTANCE = 3,
  MABML_STATUS_SOLVE_FAILED = 4,
  MABML_STATUS_UNKNOWN_POLICY = 5,
  MABML_STATUS_SIMULATION_FAILED = 6,
  MABML_STATUS_INVALID_ARGUMENT = 7,
} MabmlStatus;

/**
 * Opaque problem instance.
 */
typedef struct MabmlInstance MabmlInstance;

/**
 * Opaque solved relaxation: multipliers, lower bound and index table.
 */
typedef struct MabmlSolution MabmlSolution;

/**
 * Monte Carlo aggregate returned by value.
 */
typedef struct {
  uintptr_t runs;
  double mean;
  double ci_halfwidth;
  double lower_bound;
  double deviation;
  bool all_feasible;
} MabmlSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds one of the shipped cases (6, 10 or 14 areas). On success stores a
 * heap-allocated handle in `out`; release it with `mabml_instance_free`.
 */
MabmlStatus mabml_instance_build_case(uint32_t case_id,
                                      uint64_t seed,
                                      bool fixed_init,
                                      MabmlInstance **out);

/**
 * Releases an instance handle. Null is a no-op.
 */
void mabml_instance_free(MabmlInstance *instance);

/**
 * Solves the relaxation with `max_iters` subgradient iterations (0 picks
 * the default) and stores a solution handle in `out`.
 */
MabmlStatus mabml_solve(const MabmlInstance *instance, uintptr_t max_iters, MabmlSolution **out);

/**
 * Releases a solution handle. Null is a no-op.
 */
void mabml_solution_free(MabmlSolution *solution);

/**
 * Reads the certified lower bound out of a solution.
 */
MabmlStatus mabml_solution_lower_bound(const MabmlSolution *solution, double *out);

/**
 * Runs `runs` seeded Monte Carlo episodes of `policy` at scale `h` and
 * fills `out` with the aggregate.
 */
MabmlStatus mabml_simulate(const MabmlInstance *instance,
                           const MabmlSolution *solution,
                           uintptr_t h,
                           MabmlPolicy policy,
                           uintptr_t runs,
                           uint64_t master_seed,
                           MabmlSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MABML_H */
