#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "confope/types.hpp"

namespace confope {

struct BinaryToy {
  TabularPOMDP pomdp;
  TabularPolicy behavior;  // state-based, pi(1|1)=pi(0|0)=1-epsilon
  TabularPolicy target;    // observation-based, uniform
};

// Two-state, two-observation toy with a confounded behavior policy.
// Dynamics: S' = A with probability 0.8 else 1-A; r(s,a) = 1{a=s};
// Z flips the state with probability obs_flip_prob; nu uniform; gamma 0.95.
BinaryToy make_binary_confounded_pomdp(double epsilon, double obs_flip_prob);

Continuous1DProcess make_1d_process(double sigma_o, double gamma);

// Behavior pi^b(1|s) = 1/(1+exp(s+1)); target pi^e_w(1|o) = 1/(1+exp(w*o+1)).
SigmoidPolicy behavior_1d_policy();
SigmoidPolicy target_1d_policy(double w);

// Bandit instance: a one-shot POMDP (gamma = 0 semantics) plus an
// independently sampled pre-observation kernel Z- giving O-1 | S0.
struct BanditModel {
  TabularPOMDP pomdp;
  Eigen::MatrixXd pre_obs_kernel;  // S x O-, row s -> Pr(O-1 | S0 = s)
  TabularPolicy behavior;          // state-based, strictly positive
  TabularPolicy target;            // observation-based
};

// All stochastic rows are Dirichlet(1,...,1) draws; the two observation
// kernels are rejection-resampled until both have rank num_states
// (singular values > 1e-8). Throws after 1000 failed attempts.
BanditModel make_random_bandit_pomdp(int num_states, int num_obs,
                                     int num_actions, std::uint64_t seed);

}  // namespace confope
