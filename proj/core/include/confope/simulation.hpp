#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "confope/rng.hpp"
#include "confope/types.hpp"

namespace confope {

struct StepRecord {
  Obs state;
  Obs obs;
  int action = 0;
  double reward = 0.0;
};

using Trajectory = std::vector<StepRecord>;

// Behavior-policy rollouts: S0 ~ nu, O_t ~ Z(.|S_t), A_t ~ pi^b(.|S_t),
// R_t = r(S_t, A_t), S_{t+1} ~ P(.|S_t, A_t).
Trajectory rollout_behavior(const TabularPOMDP& env,
                            const TabularPolicy& behavior, int horizon,
                            RandomStream& stream);
Trajectory rollout_behavior(const Continuous1DProcess& env,
                            const SigmoidPolicy& behavior, int horizon,
                            RandomStream& stream);

// Emits (O_{t-1}, O_t, A_t, R_t, O_{t+1}) for t = 1..T-2 from each
// trajectory. Trajectories shorter than 3 are skipped and counted in
// skipped_trajectories. The tabular overload stores the exact nu_O = Z'nu;
// the continuous one collects each trajectory's O_0.
TupleDataset extract_tuples(const std::vector<Trajectory>& trajectories,
                            const TabularPOMDP& env);
TupleDataset extract_tuples(const std::vector<Trajectory>& trajectories);

// Smallest H with gamma^H * r_max / (1-gamma) <= tail_tol.
int default_truncation_horizon(double gamma, double r_max,
                               double tail_tol = 1e-4);

// Truncated Monte Carlo policy value under the (observation-based) target.
// Rollout i uses the stream derived from (seed, "mc", i); replications run
// in parallel chunks and are reduced pairwise, so the estimate depends only
// on the seed. tail_bound = gamma^H r_max/(1-gamma) is attached.
ValueEstimate monte_carlo_value(const TabularPOMDP& env, const Policy& target,
                                long n_rollouts, int horizon_trunc,
                                std::uint64_t seed);
ValueEstimate monte_carlo_value(const Continuous1DProcess& env,
                                const SigmoidPolicy& target, long n_rollouts,
                                int horizon_trunc, std::uint64_t seed);

struct ExactTabularValue {
  double j = 0.0;
  Eigen::MatrixXd latent_q;         // A x S, q^{pi_e}(a, s)
  Eigen::VectorXd occupancy_ratio;  // w(s), empty unless behavior given
  std::vector<std::string> warnings;
};

// Marginalized target chain pi~(a|s) = sum_o Z(o|s) pi^e(a|o); value by dense
// solve J = nu' (I - gamma P^e)^{-1} r^e. The occupancy ratio
// w(s) = [(I - gamma (P^e)')^{-1} nu](s) / P_tuples(s) needs the behavior
// policy and the rollout horizon T that generated the tuples (tuple t sits at
// S_t, t in 1..T-2); it is left empty when those are not supplied.
ExactTabularValue exact_tabular_value(const TabularPOMDP& env,
                                      const Policy& target,
                                      const TabularPolicy* behavior = nullptr,
                                      int horizon = 0);

// pi~(a|s) = sum_o Z(o|s) pi^e(a|o) for an observation-based target, or the
// policy table itself when the policy is state-based. S x A.
Eigen::MatrixXd marginalized_target(const TabularPOMDP& env,
                                    const Policy& target);
// State chain under a state-based policy: S x S.
Eigen::MatrixXd state_chain(const TabularPOMDP& env, const TabularPolicy& pol);
// Average of d_t = nu (P^b)^t over t in {1..T-2}: where tuples actually sit.
Eigen::VectorXd tuple_state_occupancy(const TabularPOMDP& env,
                                      const TabularPolicy& behavior,
                                      int horizon);

}  // namespace confope
