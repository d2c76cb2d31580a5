#include "confope/types.hpp"

#include <cmath>
#include <stdexcept>

namespace confope {

namespace {

constexpr double kRowSumTol = 1e-12;

void check_stochastic_row(const Eigen::VectorXd& row, const char* what) {
  if (row.size() == 0) throw std::invalid_argument(std::string(what) + ": empty row");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    if (!(row[i] >= 0.0))
      throw std::invalid_argument(std::string(what) +
                                  ": negative or NaN probability entry");
    sum += row[i];
  }
  if (std::abs(sum - 1.0) > kRowSumTol)
    throw std::invalid_argument(std::string(what) +
                                ": row does not sum to 1 within 1e-12");
}

void check_stochastic_matrix(const Eigen::MatrixXd& m, const char* what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    check_stochastic_row(m.row(r), what);
}

}  // namespace

double obs_scalar(const Obs& o) {
  if (obs_is_discrete(o)) return static_cast<double>(obs_index(o));
  const auto& v = obs_vec(o);
  if (v.size() != 1)
    throw std::invalid_argument("obs_scalar: vector observation is not 1-d");
  return v[0];
}

Obs make_obs(double x) {
  Eigen::VectorXd v(1);
  v[0] = x;
  return Obs(v);
}

TabularPOMDP::TabularPOMDP(Eigen::VectorXd init,
                           std::vector<Eigen::MatrixXd> trans,
                           Eigen::MatrixXd rew, Eigen::MatrixXd obs,
                           double gamma, std::optional<double> r_max_bound) {
  num_states = static_cast<int>(init.size());
  num_actions = static_cast<int>(trans.size());
  num_obs = static_cast<int>(obs.cols());
  if (num_states <= 0 || num_actions <= 0 || num_obs <= 0)
    throw std::invalid_argument("TabularPOMDP: empty dimension");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("TabularPOMDP: discount must be in [0,1)");
  check_stochastic_row(init, "init_dist");
  for (const auto& p : trans) {
    if (p.rows() != num_states || p.cols() != num_states)
      throw std::invalid_argument("TabularPOMDP: transition shape mismatch");
    check_stochastic_matrix(p, "transition");
  }
  if (rew.rows() != num_states || rew.cols() != num_actions)
    throw std::invalid_argument("TabularPOMDP: reward shape mismatch");
  if (obs.rows() != num_states)
    throw std::invalid_argument("TabularPOMDP: obs_kernel shape mismatch");
  check_stochastic_matrix(obs, "obs_kernel");

  r_max = r_max_bound.value_or(rew.maxCoeff());
  for (Eigen::Index s = 0; s < rew.rows(); ++s)
    for (Eigen::Index a = 0; a < rew.cols(); ++a)
      if (!(rew(s, a) >= 0.0 && rew(s, a) <= r_max))
        throw std::invalid_argument("TabularPOMDP: reward outside [0, r_max]");

  init_dist = std::move(init);
  transition = std::move(trans);
  reward = std::move(rew);
  obs_kernel = std::move(obs);
  discount = gamma;
}

double SigmoidPolicy::prob(int action, double x) const {
  const double p1 = 1.0 / (1.0 + std::exp(weight * x + bias));
  return action == 1 ? p1 : 1.0 - p1;
}

TabularPolicy::TabularPolicy(Eigen::MatrixXd t, InputKind kind)
    : table(std::move(t)), input_kind(kind) {
  check_stochastic_matrix(table, "TabularPolicy");
}

double policy_prob(const Policy& p, int action, const Obs& x) {
  if (const auto* tab = std::get_if<TabularPolicy>(&p))
    return tab->prob(action, obs_index(x));
  return std::get<SigmoidPolicy>(p).prob(action, obs_scalar(x));
}

int policy_num_actions(const Policy& p) {
  if (const auto* tab = std::get_if<TabularPolicy>(&p))
    return tab->num_actions();
  return 2;
}

InputKind policy_input_kind(const Policy& p) {
  if (const auto* tab = std::get_if<TabularPolicy>(&p)) return tab->input_kind;
  return std::get<SigmoidPolicy>(p).input_kind;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::oracle_exact: return "oracle_exact";
    case Method::oracle_mc: return "oracle_mc";
    case Method::tabular_pinv: return "tabular_pinv";
    case Method::vm_linear: return "vm_linear";
    case Method::is_linear: return "is_linear";
    case Method::lstdq_naive: return "lstdq_naive";
    case Method::pomql: return "pomql";
    case Method::pomwl: return "pomwl";
    case Method::mql: return "mql";
    case Method::mwl: return "mwl";
    case Method::dr: return "dr";
    case Method::dr_crossfit: return "dr_crossfit";
  }
  return "unknown";
}

std::optional<Method> method_from_name(const std::string& name) {
  for (Method m :
       {Method::oracle_exact, Method::oracle_mc, Method::tabular_pinv,
        Method::vm_linear, Method::is_linear, Method::lstdq_naive,
        Method::pomql, Method::pomwl, Method::mql, Method::mwl, Method::dr,
        Method::dr_crossfit}) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

}  // namespace confope
