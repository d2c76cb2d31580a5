#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "confope/types.hpp"

namespace confope {

// Joint law Q(s_prev, s) of consecutive latent states at a uniformly drawn
// interior step (t in 1..T-2) of a length-T behavior trajectory.
Eigen::MatrixXd tuple_prev_state_joint(const TabularPOMDP& env,
                                       const TabularPolicy& behavior,
                                       int horizon);

// Backward kernel B(s, o_minus) = Pr(O_{t-1} = o_minus | S_t = s) under the
// same tuple law. Rows with zero occupancy are left at zero.
Eigen::MatrixXd backward_obs_kernel(const TabularPOMDP& env,
                                    const TabularPolicy& behavior,
                                    int horizon);

struct TabularOracleBridges {
  Eigen::MatrixXd b_value;   // num_actions x num_obs, argument (a, o)
  Eigen::MatrixXd b_weight;  // num_actions x num_obs, argument (a, o_minus)
  std::vector<std::string> warnings;
};

// Closed-form bridges: per action, b_value solves
//   sum_o Z(o|s) b_value(a, o) = pi~(a|s) q(a, s)
// against the forward observation kernel, and b_weight solves
//   sum_o B(s, o) b_weight(a, o) = (1-gamma) w(s) / pi^b(a|s)
// against the backward kernel. Rows with pi^b(a|s) = 0 are dropped (never
// realized in the data). A warning is recorded for each equation system whose
// min-norm solution leaves a residual, i.e. when no exact bridge exists.
TabularOracleBridges tabular_oracle_bridges(const TabularPOMDP& env,
                                            const TabularPolicy& behavior,
                                            const TabularPolicy& target,
                                            int horizon);

// Exact enumeration of the tuple law as a weighted dataset: one row per
// (o_minus, o, a, s_plus-induced o_plus) combination with positive mass.
// Moments computed against it match population expectations to rounding.
TupleDataset population_tuple_dataset(const TabularPOMDP& env,
                                      const TabularPolicy& behavior,
                                      int horizon,
                                      std::string env_id = "population");

}  // namespace confope
