#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "confope/types.hpp"

namespace confope {

// Feature embedding of (action, observation) pairs. The layout is per-action
// blocked: the embedding of observation o occupies the block of the taken
// action and every other block is zero, so features of different actions are
// exactly orthogonal and linear classes can represent action-dependent
// functions.
struct FeatureMap {
  enum class Kind { one_hot, random_fourier };

  Kind kind = Kind::one_hot;
  int dim = 0;  // total length, num_actions * block_dim
  int num_actions = 0;
  int num_obs = 0;  // one-hot only

  // Random Fourier parameters. Each row of W is drawn with per-coordinate
  // variance 2*kernel_gamma: for w ~ N(0, 2*kernel_gamma I),
  // E[cos(w'(o-o'))] = exp(-kernel_gamma*|o-o'|^2), and with
  // phi(o) = sqrt(2/D) cos(W o + b), b ~ U[0,2pi), E[phi(o)'phi(o')] equals
  // that same Gaussian kernel.
  Eigen::MatrixXd W;  // D x obs_dim
  Eigen::VectorXd b;  // D
  double scale = 0.0; // sqrt(2/D)
  double kernel_gamma = 0.0;
  std::uint64_t seed = 0;

  int block_dim() const { return num_actions > 0 ? dim / num_actions : 0; }
};

FeatureMap one_hot_features(int num_actions, int num_obs);

// Defaults follow the experimental setup: kernel_gamma = 5, D = 100.
FeatureMap sample_rff(int obs_dim, int num_features_per_action,
                      double kernel_gamma, int num_actions,
                      std::uint64_t seed);

Eigen::VectorXd featurize(const FeatureMap& fm, int action, const Obs& obs);

// Per-observation feature block (no action placement), one row per input row.
// Fast path used by the moment assemblers.
Eigen::MatrixXd feature_block(const FeatureMap& fm,
                              const Eigen::MatrixXd& obs_points);

}  // namespace confope
