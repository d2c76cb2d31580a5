#include "confope/simulation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "confope/parallel.hpp"

namespace confope {

Trajectory rollout_behavior(const TabularPOMDP& env,
                            const TabularPolicy& behavior, int horizon,
                            RandomStream& stream) {
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  if (behavior.input_kind != InputKind::state_based)
    throw std::invalid_argument("behavior policy must be state-based");
  Trajectory traj;
  traj.reserve(horizon);
  int s = stream.categorical(env.init_dist);
  for (int t = 0; t < horizon; ++t) {
    const int o = stream.categorical(env.obs_kernel.row(s));
    const int a = stream.categorical(behavior.table.row(s));
    const double r = env.reward(s, a);
    traj.push_back(StepRecord{Obs(s), Obs(o), a, r});
    s = stream.categorical(env.transition[a].row(s));
  }
  return traj;
}

Trajectory rollout_behavior(const Continuous1DProcess& env,
                            const SigmoidPolicy& behavior, int horizon,
                            RandomStream& stream) {
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  if (behavior.input_kind != InputKind::state_based)
    throw std::invalid_argument("behavior policy must be state-based");
  Trajectory traj;
  traj.reserve(horizon);
  double s = env.init_mean + env.init_std * stream.normal();
  for (int t = 0; t < horizon; ++t) {
    const double o =
        env.obs_noise_std == 0.0 ? s : s + env.obs_noise_std * stream.normal();
    const int a = stream.uniform01() < behavior.prob(1, s) ? 1 : 0;
    const double r = s + (2.0 * a - 1.0);
    traj.push_back(StepRecord{make_obs(s), make_obs(o), a, r});
    s = env.trans_coef * s + env.action_shift * (2.0 * a - 1.0) +
        env.trans_noise_std * stream.normal();
  }
  return traj;
}

namespace {

TupleDataset extract_tuples_impl(const std::vector<Trajectory>& trajectories) {
  TupleDataset data;
  std::size_t skipped = 0;
  std::size_t total = 0;
  for (const auto& traj : trajectories)
    if (traj.size() >= 3) total += traj.size() - 2;
  data.tuples.reserve(total);
  for (const auto& traj : trajectories) {
    if (traj.size() < 3) {
      ++skipped;
      continue;
    }
    for (std::size_t t = 1; t + 1 < traj.size(); ++t) {
      data.tuples.push_back(TransitionTuple{traj[t - 1].obs, traj[t].obs,
                                            traj[t].action, traj[t].reward,
                                            traj[t + 1].obs});
    }
  }
  data.n = data.tuples.size();
  data.skipped_trajectories = skipped;
  return data;
}

}  // namespace

TupleDataset extract_tuples(const std::vector<Trajectory>& trajectories,
                            const TabularPOMDP& env) {
  TupleDataset data = extract_tuples_impl(trajectories);
  data.init_obs.probs = env.obs_kernel.transpose() * env.init_dist;
  data.gamma = env.discount;
  return data;
}

TupleDataset extract_tuples(const std::vector<Trajectory>& trajectories) {
  TupleDataset data = extract_tuples_impl(trajectories);
  for (const auto& traj : trajectories)
    if (traj.size() >= 3) data.init_obs.samples.push_back(traj[0].obs);
  if (data.init_obs.samples.empty())
    throw std::invalid_argument("extract_tuples: no trajectory of length >= 3");
  return data;
}

int default_truncation_horizon(double gamma, double r_max, double tail_tol) {
  if (gamma == 0.0) return 1;
  int h = 1;
  double tail = r_max / (1.0 - gamma);
  while (tail * std::pow(gamma, h) > tail_tol && h < 100000) ++h;
  return h;
}

namespace {

struct McAccumulator {
  std::vector<double> returns;
};

ValueEstimate finalize_mc(std::vector<double>& returns, double gamma,
                          double r_max, int horizon) {
  const std::size_t n = returns.size();
  const double mean = pairwise_sum(returns) / static_cast<double>(n);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = returns[i] - mean;
    sq[i] = d * d;
  }
  ValueEstimate est;
  est.estimate = mean;
  est.method = Method::oracle_mc;
  est.n = n;
  if (n > 1)
    est.std_error = std::sqrt(pairwise_sum(sq) /
                              (static_cast<double>(n - 1) * static_cast<double>(n)));
  else
    est.std_error = 0.0;
  est.tail_bound = std::pow(gamma, horizon) * r_max / (1.0 - gamma);
  return est;
}

}  // namespace

ValueEstimate monte_carlo_value(const TabularPOMDP& env, const Policy& target,
                                long n_rollouts, int horizon_trunc,
                                std::uint64_t seed) {
  if (n_rollouts <= 0 || horizon_trunc <= 0)
    throw std::invalid_argument("monte_carlo_value: bad parameters");
  if (policy_input_kind(target) != InputKind::observation_based)
    throw std::invalid_argument("target policy must be observation-based");
  std::vector<double> returns(n_rollouts);
  const std::size_t chunk = 4096;
  parallel_chunks(n_rollouts, chunk, [&](std::size_t, std::size_t b,
                                         std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      RandomStream stream = derive_stream(seed, "mc", i);
      int s = stream.categorical(env.init_dist);
      double ret = 0.0;
      double disc = 1.0;
      for (int t = 0; t < horizon_trunc; ++t) {
        const int o = stream.categorical(env.obs_kernel.row(s));
        int a;
        if (const auto* tab = std::get_if<TabularPolicy>(&target))
          a = stream.categorical(tab->table.row(o));
        else {
          const auto& sig = std::get<SigmoidPolicy>(target);
          a = stream.uniform01() < sig.prob(1, static_cast<double>(o)) ? 1 : 0;
        }
        ret += disc * env.reward(s, a);
        disc *= env.discount;
        s = stream.categorical(env.transition[a].row(s));
      }
      returns[i] = ret;
    }
  });
  return finalize_mc(returns, env.discount, env.r_max, horizon_trunc);
}

ValueEstimate monte_carlo_value(const Continuous1DProcess& env,
                                const SigmoidPolicy& target, long n_rollouts,
                                int horizon_trunc, std::uint64_t seed) {
  if (n_rollouts <= 0 || horizon_trunc <= 0)
    throw std::invalid_argument("monte_carlo_value: bad parameters");
  if (target.input_kind != InputKind::observation_based)
    throw std::invalid_argument("target policy must be observation-based");
  std::vector<double> returns(n_rollouts);
  const std::size_t chunk = 1024;
  parallel_chunks(n_rollouts, chunk, [&](std::size_t, std::size_t b,
                                         std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      RandomStream stream = derive_stream(seed, "mc", i);
      double s = env.init_mean + env.init_std * stream.normal();
      double ret = 0.0;
      double disc = 1.0;
      for (int t = 0; t < horizon_trunc; ++t) {
        const double o = env.obs_noise_std == 0.0
                             ? s
                             : s + env.obs_noise_std * stream.normal();
        const int a = stream.uniform01() < target.prob(1, o) ? 1 : 0;
        ret += disc * (s + (2.0 * a - 1.0));
        disc *= env.discount;
        s = env.trans_coef * s + env.action_shift * (2.0 * a - 1.0) +
            env.trans_noise_std * stream.normal();
      }
      returns[i] = ret;
    }
  });
  return finalize_mc(returns, env.discount, env.r_max, horizon_trunc);
}

Eigen::MatrixXd marginalized_target(const TabularPOMDP& env,
                                    const Policy& target) {
  Eigen::MatrixXd out(env.num_states, policy_num_actions(target));
  const bool state_based =
      policy_input_kind(target) == InputKind::state_based;
  for (int s = 0; s < env.num_states; ++s)
    for (int a = 0; a < out.cols(); ++a) {
      if (state_based) {
        out(s, a) = policy_prob(target, a, Obs(s));
        continue;
      }
      double p = 0.0;
      for (int o = 0; o < env.num_obs; ++o)
        p += env.obs_kernel(s, o) * policy_prob(target, a, Obs(o));
      out(s, a) = p;
    }
  return out;
}

Eigen::MatrixXd state_chain(const TabularPOMDP& env,
                            const TabularPolicy& pol) {
  Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(env.num_states, env.num_states);
  for (int a = 0; a < env.num_actions; ++a)
    chain += pol.table.col(a).asDiagonal() * env.transition[a];
  return chain;
}

Eigen::VectorXd tuple_state_occupancy(const TabularPOMDP& env,
                                      const TabularPolicy& behavior,
                                      int horizon) {
  if (horizon < 3)
    throw std::invalid_argument("tuple_state_occupancy: horizon must be >= 3");
  const Eigen::MatrixXd chain = state_chain(env, behavior);
  Eigen::VectorXd d = env.init_dist;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(env.num_states);
  for (int t = 1; t <= horizon - 2; ++t) {
    d = chain.transpose() * d;
    acc += d;
  }
  return acc / static_cast<double>(horizon - 2);
}

ExactTabularValue exact_tabular_value(const TabularPOMDP& env,
                                      const Policy& target,
                                      const TabularPolicy* behavior,
                                      int horizon) {
  ExactTabularValue out;
  const int ns = env.num_states;
  const int na = env.num_actions;
  const Eigen::MatrixXd pi_marg = marginalized_target(env, target);  // S x A

  Eigen::MatrixXd chain_e = Eigen::MatrixXd::Zero(ns, ns);
  for (int a = 0; a < na; ++a)
    chain_e += pi_marg.col(a).asDiagonal() * env.transition[a];
  const Eigen::VectorXd r_e =
      (pi_marg.array() * env.reward.array()).rowwise().sum();

  const Eigen::MatrixXd sys =
      Eigen::MatrixXd::Identity(ns, ns) - env.discount * chain_e;
  const Eigen::VectorXd v = sys.partialPivLu().solve(r_e);
  out.j = env.init_dist.dot(v);

  out.latent_q.resize(na, ns);
  for (int a = 0; a < na; ++a)
    for (int s = 0; s < ns; ++s)
      out.latent_q(a, s) =
          env.reward(s, a) + env.discount * env.transition[a].row(s).dot(v);

  if (behavior != nullptr && horizon >= 3) {
    const Eigen::VectorXd mu =
        sys.transpose().partialPivLu().solve(env.init_dist);
    const Eigen::VectorXd p_tuples =
        tuple_state_occupancy(env, *behavior, horizon);
    out.occupancy_ratio.resize(ns);
    for (int s = 0; s < ns; ++s) {
      if (p_tuples[s] <= 0.0) {
        out.occupancy_ratio[s] = std::numeric_limits<double>::infinity();
        out.warnings.push_back(
            "state " + std::to_string(s) +
            " has zero behavior occupancy; weight set to +inf");
      } else {
        out.occupancy_ratio[s] = mu[s] / p_tuples[s];
      }
    }
  }
  return out;
}

}  // namespace confope
