#include "confope/tabular_oracle.hpp"

#include <stdexcept>
#include <utility>

#include "confope/linalg.hpp"
#include "confope/simulation.hpp"

namespace confope {

Eigen::MatrixXd tuple_prev_state_joint(const TabularPOMDP& env,
                                       const TabularPolicy& behavior,
                                       int horizon) {
  if (horizon < 3)
    throw std::invalid_argument("tuple_prev_state_joint: horizon must be >= 3");
  const Eigen::MatrixXd chain = state_chain(env, behavior);
  const int ns = env.num_states;
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(ns, ns);
  Eigen::VectorXd d = env.init_dist;  // d_{t-1}, starting at t = 1
  for (int t = 1; t <= horizon - 2; ++t) {
    joint += d.asDiagonal() * chain;
    d = chain.transpose() * d;
  }
  return joint / static_cast<double>(horizon - 2);
}

Eigen::MatrixXd backward_obs_kernel(const TabularPOMDP& env,
                                    const TabularPolicy& behavior,
                                    int horizon) {
  const Eigen::MatrixXd joint = tuple_prev_state_joint(env, behavior, horizon);
  const Eigen::VectorXd occ = joint.colwise().sum();  // P_tuples(s)
  Eigen::MatrixXd back = joint.transpose() * env.obs_kernel;  // s x o_minus
  for (int s = 0; s < env.num_states; ++s) {
    if (occ[s] > 0.0) back.row(s) /= occ[s];
  }
  return back;
}

TabularOracleBridges tabular_oracle_bridges(const TabularPOMDP& env,
                                            const TabularPolicy& behavior,
                                            const TabularPolicy& target,
                                            int horizon) {
  if (policy_input_kind(behavior) != InputKind::state_based)
    throw std::invalid_argument("tabular_oracle_bridges: behavior policy must "
                                "be state-based");
  const ExactTabularValue exact =
      exact_tabular_value(env, target, &behavior, horizon);
  const Eigen::MatrixXd pi_marg = marginalized_target(env, target);
  const Eigen::MatrixXd back = backward_obs_kernel(env, behavior, horizon);
  const int na = env.num_actions;
  const int ns = env.num_states;

  TabularOracleBridges out;
  out.warnings = exact.warnings;
  out.b_value.resize(na, env.num_obs);
  out.b_weight.resize(na, env.num_obs);

  const double res_tol = 1e-8;
  for (int a = 0; a < na; ++a) {
    const Eigen::VectorXd rhs_v =
        pi_marg.col(a).cwiseProduct(exact.latent_q.row(a).transpose());
    const Eigen::VectorXd x = pinv_solve(env.obs_kernel, rhs_v);
    if ((env.obs_kernel * x - rhs_v).norm() > res_tol * (1.0 + rhs_v.norm()))
      out.warnings.push_back("value bridge equation has no exact solution for "
                             "action " + std::to_string(a));
    out.b_value.row(a) = x.transpose();

    // Keep only states the behavior policy can pair with this action.
    std::vector<int> rows;
    for (int s = 0; s < ns; ++s)
      if (behavior.prob(a, s) > 0.0) rows.push_back(s);
    Eigen::MatrixXd back_a(rows.size(), env.num_obs);
    Eigen::VectorXd rhs_w(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const int s = rows[i];
      back_a.row(i) = back.row(s);
      rhs_w[i] = (1.0 - env.discount) * exact.occupancy_ratio[s] /
                 behavior.prob(a, s);
    }
    const Eigen::VectorXd y = pinv_solve(back_a, rhs_w);
    if ((back_a * y - rhs_w).norm() > res_tol * (1.0 + rhs_w.norm()))
      out.warnings.push_back("weight bridge equation has no exact solution "
                             "for action " + std::to_string(a));
    out.b_weight.row(a) = y.transpose();
  }
  return out;
}

TupleDataset population_tuple_dataset(const TabularPOMDP& env,
                                      const TabularPolicy& behavior,
                                      int horizon, std::string env_id) {
  if (policy_input_kind(behavior) != InputKind::state_based)
    throw std::invalid_argument("population_tuple_dataset: behavior policy "
                                "must be state-based");
  const Eigen::MatrixXd joint = tuple_prev_state_joint(env, behavior, horizon);
  const int ns = env.num_states;
  const int no = env.num_obs;
  const int na = env.num_actions;

  // Pr(s, o_minus) marginalizes the previous latent state immediately.
  const Eigen::MatrixXd state_preobs = joint.transpose() * env.obs_kernel;

  TupleDataset data;
  data.env_id = std::move(env_id);
  data.gamma = env.discount;
  data.init_obs.probs = env.obs_kernel.transpose() * env.init_dist;

  // The reward depends on the latent state, so enumerate s explicitly and
  // collapse only s_plus (the tuple stores o_plus alone).
  for (int s = 0; s < ns; ++s)
    for (int om = 0; om < no; ++om) {
      const double p_som = state_preobs(s, om);
      if (p_som <= 0.0) continue;
      for (int a = 0; a < na; ++a) {
        const double pa = behavior.prob(a, s);
        if (pa <= 0.0) continue;
        const Eigen::VectorXd p_oplus =
            env.transition[a].row(s) * env.obs_kernel;  // length num_obs
        for (int o = 0; o < no; ++o) {
          const double po = env.obs_kernel(s, o);
          if (po <= 0.0) continue;
          for (int op = 0; op < no; ++op) {
            const double w = p_som * pa * po * p_oplus[op];
            if (w <= 0.0) continue;
            data.tuples.push_back(
                TransitionTuple{Obs{om}, Obs{o}, a, env.reward(s, a), Obs{op}});
            data.weights.push_back(w);
          }
        }
      }
    }
  data.n = data.tuples.size();
  return data;
}

}  // namespace confope
