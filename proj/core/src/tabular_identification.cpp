#include "confope/tabular_identification.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "confope/linalg.hpp"
#include "confope/rng.hpp"

namespace confope {

namespace {

int level_index(const std::vector<double>& support, double r) {
  const auto it = std::lower_bound(support.begin(), support.end(), r);
  if (it == support.end() || *it != r)
    throw std::logic_error("reward level not in support");
  return static_cast<int>(it - support.begin());
}

}  // namespace

BanditProbMatrices estimate_bandit_matrices(const BanditDataset& data,
                                            double smooth) {
  if (data.tuples.empty())
    throw std::invalid_argument("estimate_bandit_matrices: empty dataset");
  const int n_pre = data.num_preobs;
  const int n_obs = data.num_obs;
  const int n_act = data.num_actions;

  std::vector<double> support;
  {
    std::map<double, int> seen;
    for (const auto& t : data.tuples) seen.emplace(t.r, 0);
    for (const auto& [r, _] : seen) support.push_back(r);
  }
  const int levels = static_cast<int>(support.size());

  BanditProbMatrices out;
  out.num_preobs = n_pre;
  out.num_obs = n_obs;
  out.num_actions = n_act;
  out.reward_support = support;
  out.m_o.assign(n_act, Eigen::MatrixXd::Constant(n_obs, n_pre, smooth));
  out.m_ro.assign(n_act,
                  Eigen::MatrixXd::Constant(levels * n_obs, n_pre, smooth));

  Eigen::MatrixXd cell = Eigen::MatrixXd::Constant(
      n_act, n_pre, smooth * n_obs);  // total count per (a, o-) column
  Eigen::VectorXd p_o = Eigen::VectorXd::Zero(n_obs);
  double total = 0.0;
  for (std::size_t i = 0; i < data.tuples.size(); ++i) {
    const auto& t = data.tuples[i];
    const double w = data.weighted() ? data.weights[i] : 1.0;
    out.m_o[t.a](t.o, t.o_minus) += w;
    out.m_ro[t.a](level_index(support, t.r) * n_obs + t.o, t.o_minus) += w;
    cell(t.a, t.o_minus) += w;
    p_o[t.o] += w;
    total += w;
  }

  std::vector<std::string> empty_cells;
  for (int a = 0; a < n_act; ++a)
    for (int om = 0; om < n_pre; ++om) {
      if (cell(a, om) <= 0.0) {
        empty_cells.push_back("(a=" + std::to_string(a) +
                              ", o_minus=" + std::to_string(om) + ")");
        continue;
      }
      out.m_o[a].col(om) /= cell(a, om);
      out.m_ro[a].col(om) /= cell(a, om);
    }
  if (!empty_cells.empty()) {
    std::ostringstream msg;
    msg << "estimate_bandit_matrices: empty conditioning cells:";
    for (const auto& c : empty_cells) msg << ' ' << c;
    throw std::invalid_argument(msg.str());
  }
  out.p_o = p_o / total;
  return out;
}

BanditProbMatrices population_bandit_matrices(const BanditModel& model) {
  const auto& env = model.pomdp;
  const int ns = env.num_states;
  const int n_obs = env.num_obs;
  const int n_pre = static_cast<int>(model.pre_obs_kernel.cols());
  const int n_act = env.num_actions;

  std::vector<double> support;
  {
    std::map<double, int> seen;
    for (int s = 0; s < ns; ++s)
      for (int a = 0; a < n_act; ++a) seen.emplace(env.reward(s, a), 0);
    for (const auto& [r, _] : seen) support.push_back(r);
  }
  const int levels = static_cast<int>(support.size());

  BanditProbMatrices out;
  out.num_preobs = n_pre;
  out.num_obs = n_obs;
  out.num_actions = n_act;
  out.reward_support = support;
  out.m_o.assign(n_act, Eigen::MatrixXd::Zero(n_obs, n_pre));
  out.m_ro.assign(n_act, Eigen::MatrixXd::Zero(levels * n_obs, n_pre));

  for (int a = 0; a < n_act; ++a) {
    for (int om = 0; om < n_pre; ++om) {
      // Pr(s | A0=a, O-1=om) up to normalization.
      Eigen::VectorXd post(ns);
      for (int s = 0; s < ns; ++s)
        post[s] = env.init_dist[s] * model.pre_obs_kernel(s, om) *
                  model.behavior.table(s, a);
      const double norm = post.sum();
      if (norm <= 0.0) continue;
      post /= norm;
      for (int s = 0; s < ns; ++s) {
        const int lev = level_index(support, env.reward(s, a));
        for (int o = 0; o < n_obs; ++o) {
          const double p = post[s] * env.obs_kernel(s, o);
          out.m_o[a](o, om) += p;
          out.m_ro[a](lev * n_obs + o, om) += p;
        }
      }
    }
  }
  out.p_o = env.obs_kernel.transpose() * env.init_dist;
  return out;
}

std::string RankDiagnostics::to_json() const {
  std::ostringstream os;
  os << "{\"per_action_rank\": [";
  for (std::size_t i = 0; i < per_action_rank.size(); ++i)
    os << (i ? ", " : "") << per_action_rank[i];
  os << "], \"obs_rank\": ";
  if (obs_rank) os << *obs_rank; else os << "null";
  os << ", \"preobs_rank\": ";
  if (preobs_rank) os << *preobs_rank; else os << "null";
  os << ", \"pass\": " << (pass ? "true" : "false");
  os << ", \"tol\": " << tol << "}";
  return os.str();
}

RankDiagnostics check_rank_conditions(const BanditProbMatrices& matrices,
                                      double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  RankDiagnostics diag;
  diag.tol = tol;
  bool full = true;
  for (const auto& m : matrices.m_o) {
    const int r = numerical_rank(m, tol);
    diag.per_action_rank.push_back(r);
    full = full && r == std::min(m.rows(), m.cols());
  }
  diag.pass = full;
  return diag;
}

RankDiagnostics check_rank_conditions(const BanditModel& model, double tol) {
  RankDiagnostics diag =
      check_rank_conditions(population_bandit_matrices(model), tol);
  const int ns = model.pomdp.num_states;
  diag.obs_rank = numerical_rank(model.pomdp.obs_kernel, tol);
  diag.preobs_rank = numerical_rank(model.pre_obs_kernel, tol);
  diag.pass = *diag.obs_rank == ns && *diag.preobs_rank == ns;
  bool per_action_full = true;
  for (int r : diag.per_action_rank) per_action_full = per_action_full && r == ns;
  diag.equivalence_holds = (per_action_full == diag.pass);
  return diag;
}

double bandit_value_pseudoinverse(const BanditProbMatrices& matrices,
                                  const TabularPolicy& target, bool force,
                                  double pinv_cutoff) {
  const RankDiagnostics diag = check_rank_conditions(matrices, 1e-8);
  if (!diag.pass && !force)
    throw std::runtime_error("bandit_value_pseudoinverse: rank check failed: " +
                             diag.to_json());
  const int n_obs = matrices.num_obs;
  double j = 0.0;
  for (int a = 0; a < matrices.num_actions; ++a) {
    const Eigen::VectorXd v =
        matrices.m_ro[a] *
        (pseudo_inverse(matrices.m_o[a], pinv_cutoff) * matrices.p_o);
    for (std::size_t lev = 0; lev < matrices.reward_support.size(); ++lev)
      for (int o = 0; o < n_obs; ++o)
        j += matrices.reward_support[lev] * target.prob(a, o) *
             v[static_cast<int>(lev) * n_obs + o];
  }
  return j;
}

double bandit_value_enumeration(const BanditModel& model,
                                const TabularPolicy& target) {
  const auto& env = model.pomdp;
  double j = 0.0;
  for (int s = 0; s < env.num_states; ++s)
    for (int o = 0; o < env.num_obs; ++o)
      for (int a = 0; a < env.num_actions; ++a)
        j += env.init_dist[s] * env.obs_kernel(s, o) * target.prob(a, o) *
             env.reward(s, a);
  return j;
}

BanditDataset sample_bandit_dataset(const BanditModel& model, long n,
                                    std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("sample_bandit_dataset: n > 0");
  BanditDataset data;
  data.num_preobs = static_cast<int>(model.pre_obs_kernel.cols());
  data.num_obs = model.pomdp.num_obs;
  data.num_actions = model.pomdp.num_actions;
  data.env_id = "random-bandit";
  data.seed = seed;
  data.tuples.reserve(n);
  std::map<double, int> support;
  for (long i = 0; i < n; ++i) {
    RandomStream stream = derive_stream(seed, "bandit", i);
    const int s = stream.categorical(model.pomdp.init_dist);
    const int om = stream.categorical(model.pre_obs_kernel.row(s));
    const int a = stream.categorical(model.behavior.table.row(s));
    const int o = stream.categorical(model.pomdp.obs_kernel.row(s));
    const double r = model.pomdp.reward(s, a);
    support.emplace(r, 0);
    data.tuples.push_back(BanditTuple{om, a, o, r});
  }
  for (const auto& [r, _] : support) data.reward_support.push_back(r);
  return data;
}

}  // namespace confope
