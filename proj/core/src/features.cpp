#include "confope/features.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "confope/rng.hpp"

namespace confope {

FeatureMap one_hot_features(int num_actions, int num_obs) {
  if (num_actions <= 0 || num_obs <= 0)
    throw std::invalid_argument("one_hot_features: sizes must be positive");
  FeatureMap fm;
  fm.kind = FeatureMap::Kind::one_hot;
  fm.num_actions = num_actions;
  fm.num_obs = num_obs;
  fm.dim = num_actions * num_obs;
  return fm;
}

FeatureMap sample_rff(int obs_dim, int num_features_per_action,
                      double kernel_gamma, int num_actions,
                      std::uint64_t seed) {
  if (obs_dim <= 0 || num_features_per_action <= 0 || num_actions <= 0)
    throw std::invalid_argument("sample_rff: sizes must be positive");
  if (!(kernel_gamma > 0.0))
    throw std::invalid_argument("sample_rff: kernel_gamma must be positive");
  FeatureMap fm;
  fm.kind = FeatureMap::Kind::random_fourier;
  fm.num_actions = num_actions;
  fm.dim = num_actions * num_features_per_action;
  fm.kernel_gamma = kernel_gamma;
  fm.seed = seed;
  fm.scale = std::sqrt(2.0 / num_features_per_action);

  RandomStream stream(derive_seed(seed, "rff", 0));
  const double freq_std = std::sqrt(2.0 * kernel_gamma);
  fm.W.resize(num_features_per_action, obs_dim);
  for (int d = 0; d < num_features_per_action; ++d)
    for (int j = 0; j < obs_dim; ++j) fm.W(d, j) = freq_std * stream.normal();
  fm.b.resize(num_features_per_action);
  for (int d = 0; d < num_features_per_action; ++d)
    fm.b[d] = 2.0 * std::numbers::pi * stream.uniform01();
  return fm;
}

Eigen::VectorXd featurize(const FeatureMap& fm, int action, const Obs& obs) {
  if (action < 0 || action >= fm.num_actions)
    throw std::invalid_argument("featurize: action out of range");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(fm.dim);
  const int bd = fm.block_dim();
  if (fm.kind == FeatureMap::Kind::one_hot) {
    const int o = obs_index(obs);
    if (o < 0 || o >= fm.num_obs)
      throw std::invalid_argument("featurize: observation index out of range");
    out[action * bd + o] = 1.0;
  } else {
    if (obs_is_discrete(obs))
      throw std::invalid_argument(
          "featurize: random-fourier map expects a vector observation");
    const auto& v = obs_vec(obs);
    if (v.size() != fm.W.cols())
      throw std::invalid_argument("featurize: observation dimension mismatch");
    out.segment(action * bd, bd) =
        fm.scale * ((fm.W * v + fm.b).array().cos());
  }
  return out;
}

Eigen::MatrixXd feature_block(const FeatureMap& fm,
                              const Eigen::MatrixXd& obs_points) {
  const Eigen::Index n = obs_points.rows();
  if (fm.kind == FeatureMap::Kind::one_hot) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, fm.num_obs);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int o = static_cast<int>(obs_points(i, 0));
      if (o < 0 || o >= fm.num_obs)
        throw std::invalid_argument(
            "feature_block: observation index out of range");
      out(i, o) = 1.0;
    }
    return out;
  }
  if (obs_points.cols() != fm.W.cols())
    throw std::invalid_argument("feature_block: observation dimension mismatch");
  Eigen::MatrixXd out = obs_points * fm.W.transpose();
  out.rowwise() += fm.b.transpose();
  return fm.scale * out.array().cos();
}

}  // namespace confope
