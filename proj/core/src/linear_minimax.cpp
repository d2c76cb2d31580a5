#include "confope/linear_minimax.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "confope/linalg.hpp"

namespace confope {

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m,
                            const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = m.row(idx[i]);
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

Eigen::VectorXd gather_col(const Eigen::MatrixXd& m, const std::vector<int>& idx,
                           int col) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = m(idx[i], col);
  return out;
}

Eigen::MatrixXd scale_rows(const Eigen::MatrixXd& m, const Eigen::VectorXd& c) {
  return (m.array().colwise() * c.array()).matrix();
}

Eigen::MatrixXd obs_col_matrix(const std::vector<TransitionTuple>& tuples,
                               const Obs TransitionTuple::*field) {
  const Eigen::Index n = static_cast<Eigen::Index>(tuples.size());
  if (n == 0) throw std::invalid_argument("empty tuple table");
  if (obs_is_discrete(tuples.front().*field)) {
    Eigen::MatrixXd out(n, 1);
    for (Eigen::Index i = 0; i < n; ++i)
      out(i, 0) = static_cast<double>(obs_index(tuples[i].*field));
    return out;
  }
  const Eigen::Index d = obs_vec(tuples.front().*field).size();
  Eigen::MatrixXd out(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    out.row(i) = obs_vec(tuples[i].*field).transpose();
  return out;
}

struct SolveResult {
  Eigen::VectorXd theta;
  std::vector<std::string> warnings;
};

// Solves sys * theta = rhs: ridge-regularized normal equations when
// ridge > 0, min-norm pseudoinverse otherwise.
SolveResult solve_moment_system(const Eigen::MatrixXd& sys,
                                const Eigen::VectorXd& rhs, double ridge,
                                const std::string& label) {
  SolveResult out;
  const int unknowns = static_cast<int>(sys.cols());
  if (ridge > 0.0) {
    const double lambda = ridge * sys.squaredNorm() / unknowns;
    Eigen::MatrixXd gram = sys.transpose() * sys;
    gram.diagonal().array() += lambda;
    out.theta = gram.ldlt().solve(sys.transpose() * rhs);
    return out;
  }
  out.theta = pinv_solve(sys, rhs);
  const int rank = numerical_rank(sys, 1e-10);
  if (rank < unknowns)
    out.warnings.push_back(label + ": moment system rank-deficient (rank " +
                           std::to_string(rank) + " of " +
                           std::to_string(unknowns) +
                           "); min-norm solution along unidentified directions");
  const double res = (sys * out.theta - rhs).norm();
  if (res > 1e-6 * std::max(1.0, rhs.norm()))
    out.warnings.push_back(label + ": no solution in feature span (residual " +
                           std::to_string(res) + ")");
  return out;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_and_se(const Eigen::VectorXd& v) {
  MeanSe out;
  const Eigen::Index n = v.size();
  out.mean = v.mean();
  if (n > 1) {
    const double var = (v.array() - out.mean).square().sum() / (n - 1);
    out.se = std::sqrt(var / n);
  }
  return out;
}

// nu_O expectation of sum_a c(a) phi-block(o~); block content is action
// independent, so the caller supplies per-sample coefficients.
Eigen::VectorXd init_block_mean(const InitObsDist& init, const FeatureMap& fm) {
  if (init.empty())
    throw std::invalid_argument("dataset carries no initial-observation "
                                "distribution");
  if (init.exact()) {
    if (fm.kind != FeatureMap::Kind::one_hot)
      throw std::invalid_argument("exact initial distribution requires "
                                  "one-hot features");
    Eigen::MatrixXd pts(init.probs.size(), 1);
    for (Eigen::Index o = 0; o < init.probs.size(); ++o)
      pts(o, 0) = static_cast<double>(o);
    return feature_block(fm, pts).transpose() * init.probs;
  }
  Eigen::MatrixXd pts = init_obs_points(init);
  return feature_block(fm, pts).colwise().mean().transpose();
}

}  // namespace

Eigen::MatrixXd init_obs_points(const InitObsDist& init) {
  if (init.samples.empty())
    throw std::invalid_argument("init_obs_points: no sampled observations");
  const Eigen::Index m = static_cast<Eigen::Index>(init.samples.size());
  if (obs_is_discrete(init.samples.front())) {
    Eigen::MatrixXd out(m, 1);
    for (Eigen::Index i = 0; i < m; ++i)
      out(i, 0) = static_cast<double>(obs_index(init.samples[i]));
    return out;
  }
  const Eigen::Index d = obs_vec(init.samples.front()).size();
  Eigen::MatrixXd out(m, d);
  for (Eigen::Index i = 0; i < m; ++i)
    out.row(i) = obs_vec(init.samples[i]).transpose();
  return out;
}

double bridge_value(const BridgeFunction& bridge, int action, const Obs& obs) {
  const int bd = bridge.fm.block_dim();
  double v;
  if (bridge.fm.kind == FeatureMap::Kind::one_hot) {
    const int o = obs_index(obs);
    if (o < 0 || o >= bridge.fm.num_obs)
      throw std::invalid_argument("bridge_value: observation out of range");
    v = bridge.theta[action * bd + o];
  } else {
    const auto& x = obs_vec(obs);
    v = bridge.theta.segment(action * bd, bd)
            .dot(bridge.fm.scale *
                 ((bridge.fm.W * x + bridge.fm.b).array().cos()).matrix());
  }
  if (bridge.reparam_policy)
    v *= policy_prob(*bridge.reparam_policy, action, obs);
  return v;
}

FeatureColumns make_feature_columns(const TupleDataset& data,
                                    const FeatureMap& fm) {
  if (data.tuples.empty())
    throw std::invalid_argument("make_feature_columns: empty dataset");
  const Eigen::Index n = static_cast<Eigen::Index>(data.tuples.size());
  FeatureColumns cols;
  cols.gamma = data.gamma;
  cols.f_minus = feature_block(fm, obs_col_matrix(data.tuples,
                                                  &TransitionTuple::o_minus));
  cols.f_o = feature_block(fm, obs_col_matrix(data.tuples,
                                              &TransitionTuple::o));
  cols.f_plus = feature_block(fm, obs_col_matrix(data.tuples,
                                                 &TransitionTuple::o_plus));
  cols.reward.resize(n);
  cols.weight.resize(n);
  cols.actions.resize(n);
  cols.by_action.assign(fm.num_actions, {});
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = data.tuples[i];
    if (t.a < 0 || t.a >= fm.num_actions)
      throw std::invalid_argument("make_feature_columns: action out of range");
    cols.reward[i] = t.r;
    cols.actions[i] = t.a;
    cols.by_action[t.a].push_back(static_cast<int>(i));
    const double w = data.weighted() ? data.weights[i] : 1.0;
    cols.weight[i] = w;
    total += w;
  }
  if (!(total > 0.0))
    throw std::invalid_argument("make_feature_columns: weights sum to zero");
  cols.weight /= total;
  return cols;
}

PolicyColumns make_policy_columns(const TupleDataset& data,
                                  const Policy& target) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.tuples.size());
  const int na = policy_num_actions(target);
  PolicyColumns pol;
  pol.pi_o.resize(n, na);
  pol.pi_plus.resize(n, na);
  pol.pa.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = data.tuples[i];
    for (int a = 0; a < na; ++a) {
      pol.pi_o(i, a) = policy_prob(target, a, t.o);
      pol.pi_plus(i, a) = policy_prob(target, a, t.o_plus);
    }
    pol.pa[i] = pol.pi_o(i, t.a);
  }
  return pol;
}

BridgeFunction fit_value_bridge_linear(const FeatureColumns& cols,
                                       const PolicyColumns& pol,
                                       const Policy& target,
                                       const FeatureMap& fm, bool reparam,
                                       double ridge) {
  const int bd = fm.block_dim();
  const int na = fm.num_actions;
  const double gamma = cols.gamma;
  Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(fm.dim, fm.dim);
  Eigen::VectorXd b_vec = Eigen::VectorXd::Zero(fm.dim);
  for (int a = 0; a < na; ++a) {
    const auto& idx = cols.by_action[a];
    if (idx.empty()) continue;
    const Eigen::MatrixXd fm_a = gather_rows(cols.f_minus, idx);
    const Eigen::MatrixXd fo_a = gather_rows(cols.f_o, idx);
    const Eigen::MatrixXd fp_a = gather_rows(cols.f_plus, idx);
    const Eigen::VectorXd w = gather(cols.weight, idx);
    const Eigen::VectorXd pa = gather(pol.pa, idx);
    const Eigen::VectorXd wpa = w.cwiseProduct(pa);

    a_mat.block(a * bd, a * bd, bd, bd) +=
        fm_a.transpose() * scale_rows(fo_a, reparam ? wpa : w);
    for (int a2 = 0; a2 < na; ++a2) {
      Eigen::VectorXd coef = gamma * wpa;
      if (reparam) coef = coef.cwiseProduct(gather_col(pol.pi_plus, idx, a2));
      a_mat.block(a * bd, a2 * bd, bd, bd) -=
          fm_a.transpose() * scale_rows(fp_a, coef);
    }
    b_vec.segment(a * bd, bd) =
        fm_a.transpose() * wpa.cwiseProduct(gather(cols.reward, idx));
  }

  SolveResult sol = solve_moment_system(a_mat, b_vec, ridge, "value bridge");
  BridgeFunction bridge;
  bridge.fm = fm;
  bridge.theta = std::move(sol.theta);
  bridge.role = BridgeRole::value;
  if (reparam) bridge.reparam_policy = target;
  bridge.warnings = std::move(sol.warnings);
  return bridge;
}

BridgeFunction fit_value_bridge_linear(const TupleDataset& data,
                                       const Policy& target,
                                       const FeatureMap& fm, bool reparam,
                                       double ridge) {
  const FeatureColumns cols = make_feature_columns(data, fm);
  const PolicyColumns pol = make_policy_columns(data, target);
  return fit_value_bridge_linear(cols, pol, target, fm, reparam, ridge);
}

BridgeFunction fit_weight_bridge_linear(const TupleDataset& data,
                                        const Policy& target,
                                        const FeatureMap& fm_g,
                                        const FeatureMap& fm_f, double ridge) {
  const FeatureColumns cols_g = make_feature_columns(data, fm_g);
  const FeatureColumns cols_f = make_feature_columns(data, fm_f);
  const PolicyColumns pol = make_policy_columns(data, target);
  const int bdg = fm_g.block_dim();
  const int bdf = fm_f.block_dim();
  const int na = fm_g.num_actions;
  if (fm_f.num_actions != na)
    throw std::invalid_argument("fit_weight_bridge_linear: feature maps "
                                "disagree on the action count");
  const double gamma = cols_g.gamma;

  Eigen::MatrixXd m_mat = Eigen::MatrixXd::Zero(fm_g.dim, fm_f.dim);
  for (int a = 0; a < na; ++a) {
    const auto& idx = cols_g.by_action[a];
    if (idx.empty()) continue;
    const Eigen::MatrixXd fmg_a = gather_rows(cols_g.f_minus, idx);
    const Eigen::MatrixXd fof_a = gather_rows(cols_f.f_o, idx);
    const Eigen::MatrixXd fpf_a = gather_rows(cols_f.f_plus, idx);
    const Eigen::VectorXd w = gather(cols_g.weight, idx);
    const Eigen::VectorXd wpa = w.cwiseProduct(gather(pol.pa, idx));

    // The future term sum_a' phi_f(a', O+) repeats the same block content in
    // every action block of the test class.
    const Eigen::MatrixXd future =
        fmg_a.transpose() * scale_rows(fpf_a, gamma * wpa);
    const Eigen::MatrixXd present = fmg_a.transpose() * scale_rows(fof_a, w);
    for (int a2 = 0; a2 < na; ++a2) {
      m_mat.block(a * bdg, a2 * bdf, bdg, bdf) += future;
      if (a2 == a) m_mat.block(a * bdg, a2 * bdf, bdg, bdf) -= present;
    }
  }

  const Eigen::VectorXd c_block = init_block_mean(data.init_obs, fm_f);
  Eigen::VectorXd rhs(fm_f.dim);
  for (int a2 = 0; a2 < na; ++a2)
    rhs.segment(a2 * bdf, bdf) = -(1.0 - gamma) * c_block;

  SolveResult sol = solve_moment_system(Eigen::MatrixXd(m_mat.transpose()),
                                        rhs, ridge, "weight bridge");
  BridgeFunction bridge;
  bridge.fm = fm_g;
  bridge.theta = std::move(sol.theta);
  bridge.role = BridgeRole::weight;
  bridge.warnings = std::move(sol.warnings);
  return bridge;
}

ValueEstimate estimate_value(ValueKind kind, const BridgeFunction& bridge,
                             const TupleDataset& data, const Policy& target) {
  ValueEstimate out;
  out.n = data.tuples.size();
  if (kind == ValueKind::vm) {
    if (bridge.role != BridgeRole::value)
      throw std::invalid_argument("estimate_value: vm needs a value bridge");
    out.method = Method::vm_linear;
    const auto& init = data.init_obs;
    if (init.empty())
      throw std::invalid_argument("estimate_value: dataset carries no "
                                  "initial-observation distribution");
    const int na = bridge.fm.num_actions;
    if (init.exact()) {
      double j = 0.0;
      for (Eigen::Index o = 0; o < init.probs.size(); ++o) {
        double s = 0.0;
        for (int a = 0; a < na; ++a)
          s += bridge_value(bridge, a, Obs{static_cast<int>(o)});
        j += init.probs[o] * s;
      }
      out.estimate = j;
    } else {
      Eigen::VectorXd vals(static_cast<Eigen::Index>(init.samples.size()));
      for (std::size_t i = 0; i < init.samples.size(); ++i) {
        double s = 0.0;
        for (int a = 0; a < na; ++a)
          s += bridge_value(bridge, a, init.samples[i]);
        vals[static_cast<Eigen::Index>(i)] = s;
      }
      const MeanSe ms = mean_and_se(vals);
      out.estimate = ms.mean;
      out.std_error = ms.se;
    }
    return out;
  }

  if (bridge.role != BridgeRole::weight)
    throw std::invalid_argument("estimate_value: is needs a weight bridge");
  out.method = Method::is_linear;
  const double inv = 1.0 / (1.0 - data.gamma);
  const Eigen::Index n = static_cast<Eigen::Index>(data.tuples.size());
  Eigen::VectorXd vals(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = data.tuples[i];
    vals[i] = inv * bridge_value(bridge, t.a, t.o_minus) * t.r *
              policy_prob(target, t.a, t.o);
  }
  if (data.weighted()) {
    const Eigen::Map<const Eigen::VectorXd> w(data.weights.data(), n);
    out.estimate = vals.dot(w) / w.sum();
  } else {
    const MeanSe ms = mean_and_se(vals);
    out.estimate = ms.mean;
    out.std_error = ms.se;
  }
  return out;
}

LstdqResult lstdq_baseline(const FeatureColumns& cols, const PolicyColumns& pol,
                           const TupleDataset& data, const Policy& target,
                           const FeatureMap& fm, double ridge) {
  const int bd = fm.block_dim();
  const int na = fm.num_actions;
  const double gamma = cols.gamma;
  Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(fm.dim, fm.dim);
  Eigen::VectorXd b_vec = Eigen::VectorXd::Zero(fm.dim);
  for (int a = 0; a < na; ++a) {
    const auto& idx = cols.by_action[a];
    if (idx.empty()) continue;
    const Eigen::MatrixXd fo_a = gather_rows(cols.f_o, idx);
    const Eigen::MatrixXd fp_a = gather_rows(cols.f_plus, idx);
    const Eigen::VectorXd w = gather(cols.weight, idx);

    a_mat.block(a * bd, a * bd, bd, bd) +=
        fo_a.transpose() * scale_rows(fo_a, w);
    for (int a2 = 0; a2 < na; ++a2) {
      const Eigen::VectorXd coef =
          gamma * w.cwiseProduct(gather_col(pol.pi_plus, idx, a2));
      a_mat.block(a * bd, a2 * bd, bd, bd) -=
          fo_a.transpose() * scale_rows(fp_a, coef);
    }
    b_vec.segment(a * bd, bd) =
        fo_a.transpose() * w.cwiseProduct(gather(cols.reward, idx));
  }

  SolveResult sol = solve_moment_system(a_mat, b_vec, ridge, "lstdq");
  LstdqResult out;
  out.q.fm = fm;
  out.q.theta = std::move(sol.theta);
  out.q.role = BridgeRole::value;
  out.q.warnings = std::move(sol.warnings);

  out.value.method = Method::lstdq_naive;
  out.value.n = data.tuples.size();
  const auto& init = data.init_obs;
  if (init.empty())
    throw std::invalid_argument("lstdq_baseline: dataset carries no "
                                "initial-observation distribution");
  auto policy_value_at = [&](const Obs& obs) {
    double s = 0.0;
    for (int a = 0; a < na; ++a)
      s += policy_prob(target, a, obs) * bridge_value(out.q, a, obs);
    return s;
  };
  if (init.exact()) {
    double j = 0.0;
    for (Eigen::Index o = 0; o < init.probs.size(); ++o)
      j += init.probs[o] * policy_value_at(Obs{static_cast<int>(o)});
    out.value.estimate = j;
  } else {
    Eigen::VectorXd vals(static_cast<Eigen::Index>(init.samples.size()));
    for (std::size_t i = 0; i < init.samples.size(); ++i)
      vals[static_cast<Eigen::Index>(i)] = policy_value_at(init.samples[i]);
    const MeanSe ms = mean_and_se(vals);
    out.value.estimate = ms.mean;
    out.value.std_error = ms.se;
  }
  return out;
}

LstdqResult lstdq_baseline(const TupleDataset& data, const Policy& target,
                           const FeatureMap& fm, double ridge) {
  const FeatureColumns cols = make_feature_columns(data, fm);
  const PolicyColumns pol = make_policy_columns(data, target);
  return lstdq_baseline(cols, pol, data, target, fm, ridge);
}

}  // namespace confope
