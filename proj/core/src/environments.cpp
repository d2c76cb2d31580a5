#include "confope/environments.hpp"

#include <cmath>
#include <stdexcept>

#include "confope/linalg.hpp"
#include "confope/rng.hpp"

namespace confope {

BinaryToy make_binary_confounded_pomdp(double epsilon, double obs_flip_prob) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("epsilon must be in (0,1)");
  if (!(obs_flip_prob >= 0.0 && obs_flip_prob < 0.5))
    throw std::invalid_argument("obs_flip_prob must be in [0, 0.5)");

  Eigen::VectorXd init(2);
  init << 0.5, 0.5;

  std::vector<Eigen::MatrixXd> trans(2, Eigen::MatrixXd(2, 2));
  for (int a = 0; a < 2; ++a)
    for (int s = 0; s < 2; ++s) {
      trans[a](s, a) = 0.8;
      trans[a](s, 1 - a) = 0.2;
    }

  Eigen::MatrixXd rew(2, 2);
  rew << 1.0, 0.0,
         0.0, 1.0;  // r(s,a) = 1{a=s}

  Eigen::MatrixXd z(2, 2);
  z << 1.0 - obs_flip_prob, obs_flip_prob,
       obs_flip_prob, 1.0 - obs_flip_prob;

  BinaryToy toy;
  toy.pomdp = TabularPOMDP(init, trans, rew, z, 0.95);

  Eigen::MatrixXd behav(2, 2);
  behav << 1.0 - epsilon, epsilon,   // pi^b(.|s=0): pi(0|0) = 1-eps
           epsilon, 1.0 - epsilon;   // pi^b(.|s=1): pi(1|1) = 1-eps
  toy.behavior = TabularPolicy(behav, InputKind::state_based);

  Eigen::MatrixXd unif = Eigen::MatrixXd::Constant(2, 2, 0.5);
  toy.target = TabularPolicy(unif, InputKind::observation_based);
  return toy;
}

Continuous1DProcess make_1d_process(double sigma_o, double gamma) {
  if (!(sigma_o >= 0.0))
    throw std::invalid_argument("sigma_o must be nonnegative");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("gamma must be in [0,1)");
  Continuous1DProcess p;
  p.obs_noise_std = sigma_o;
  p.discount = gamma;
  return p;
}

SigmoidPolicy behavior_1d_policy() {
  return SigmoidPolicy{1.0, 1.0, InputKind::state_based};
}

SigmoidPolicy target_1d_policy(double w) {
  return SigmoidPolicy{w, 1.0, InputKind::observation_based};
}

namespace {

Eigen::VectorXd dirichlet_row(int n, RandomStream& stream) {
  Eigen::VectorXd row(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    row[i] = -std::log(stream.uniform_pos());  // Gamma(1,1)
    sum += row[i];
  }
  row /= sum;
  // Renormalize exactly so construction-time row checks never trip.
  row[n - 1] = 1.0 - row.head(n - 1).sum();
  return row;
}

Eigen::VectorXd positive_row(int n, RandomStream& stream) {
  Eigen::VectorXd row =
      0.8 * dirichlet_row(n, stream).array() + 0.2 / n;
  row[n - 1] = 1.0 - row.head(n - 1).sum();
  return row;
}

}  // namespace

BanditModel make_random_bandit_pomdp(int num_states, int num_obs,
                                     int num_actions, std::uint64_t seed) {
  if (num_states <= 0 || num_actions <= 0)
    throw std::invalid_argument("sizes must be positive");
  if (num_obs < num_states)
    throw std::invalid_argument("num_obs must be at least num_states");

  RandomStream stream(derive_seed(seed, "random-bandit", 0));

  auto sample_full_rank_kernel = [&](const char* what) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Eigen::MatrixXd k(num_states, num_obs);
      for (int s = 0; s < num_states; ++s) k.row(s) = dirichlet_row(num_obs, stream);
      if (numerical_rank(k, 1e-8, false) == num_states) return k;
    }
    throw std::runtime_error(std::string("could not satisfy rank condition: ") +
                             what);
  };

  Eigen::MatrixXd z = sample_full_rank_kernel("obs kernel");
  Eigen::MatrixXd z_pre = sample_full_rank_kernel("pre-obs kernel");

  Eigen::VectorXd init = positive_row(num_states, stream);

  std::vector<Eigen::MatrixXd> trans(num_actions,
                                     Eigen::MatrixXd(num_states, num_states));
  for (int a = 0; a < num_actions; ++a)
    for (int s = 0; s < num_states; ++s)
      trans[a].row(s) = dirichlet_row(num_states, stream);

  Eigen::MatrixXd rew(num_states, num_actions);
  for (int s = 0; s < num_states; ++s)
    for (int a = 0; a < num_actions; ++a) rew(s, a) = stream.uniform01();

  Eigen::MatrixXd behav(num_states, num_actions);
  for (int s = 0; s < num_states; ++s)
    behav.row(s) = positive_row(num_actions, stream);

  Eigen::MatrixXd targ(num_obs, num_actions);
  for (int o = 0; o < num_obs; ++o)
    targ.row(o) = positive_row(num_actions, stream);

  BanditModel model;
  model.pomdp = TabularPOMDP(init, trans, rew, z, 0.0, 1.0);
  model.pre_obs_kernel = std::move(z_pre);
  model.behavior = TabularPolicy(behav, InputKind::state_based);
  model.target = TabularPolicy(targ, InputKind::observation_based);
  return model;
}

}  // namespace confope
