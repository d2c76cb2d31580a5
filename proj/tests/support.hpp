#pragma once

// Shared helpers for the unit and acceptance suites. The oracles in this
// file are written straight from the definitions (scalar loops, explicit
// sums over actions) so they exercise none of the vectorized library paths
// they are checked against.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "confope/environments.hpp"
#include "confope/features.hpp"
#include "confope/kernel_minimax.hpp"
#include "confope/rng.hpp"
#include "confope/types.hpp"

namespace testsupport {

using namespace confope;

// Discounted value sum_t gamma^t E[R_t] by iterating the marginal state
// distribution until the remaining tail is below tol.
inline double power_series_value(const TabularPOMDP& env,
                                 const TabularPolicy& pol,
                                 double tol = 1e-13) {
  const int ns = env.num_states;
  const int na = env.num_actions;

  Eigen::MatrixXd pi_s(ns, na);
  for (int s = 0; s < ns; ++s)
    for (int a = 0; a < na; ++a) {
      if (pol.input_kind == InputKind::state_based) {
        pi_s(s, a) = policy_prob(pol, a, Obs{s});
      } else {
        double acc = 0.0;
        for (int o = 0; o < env.num_obs; ++o)
          acc += env.obs_kernel(s, o) * policy_prob(pol, a, Obs{o});
        pi_s(s, a) = acc;
      }
    }

  Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(ns, ns);
  Eigen::VectorXd r_pol = Eigen::VectorXd::Zero(ns);
  for (int s = 0; s < ns; ++s)
    for (int a = 0; a < na; ++a) {
      chain.row(s) += pi_s(s, a) * env.transition[a].row(s);
      r_pol[s] += pi_s(s, a) * env.reward(s, a);
    }

  Eigen::VectorXd d = env.init_dist;
  double j = 0.0;
  double disc = 1.0;
  while (disc * env.r_max / (1.0 - env.discount) > tol) {
    j += disc * d.dot(r_pol);
    d = chain.transpose() * d;
    disc *= env.discount;
  }
  return j;
}

inline double tuple_weight(const TupleDataset& data, std::size_t i) {
  return data.weighted() ? data.weights[i] : 1.0;
}

inline double gbar(const Eigen::VectorXd& theta, const FeatureMap& fm, int a,
                   const Obs& obs) {
  return theta.dot(featurize(fm, a, obs));
}

// Double-loop evaluation of the two conditional-moment (value) losses.
inline double brute_value_loss(KernelLossKind kind,
                               const Eigen::VectorXd& theta,
                               const TupleDataset& batch, const FeatureMap& fm,
                               const Policy& target, double beta,
                               bool squared_norm) {
  const std::size_t n = batch.tuples.size();
  const int na = fm.num_actions;
  const bool po = kind == KernelLossKind::pomql;

  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) wsum += tuple_weight(batch, i);

  std::vector<double> res(n);
  std::vector<Eigen::VectorXd> anchor(n);
  std::vector<double> wb(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = batch.tuples[i];
    const double cf = po ? policy_prob(target, t.a, t.o) : 1.0;
    double cont = 0.0;
    for (int a2 = 0; a2 < na; ++a2)
      cont += policy_prob(target, a2, t.o_plus) * gbar(theta, fm, a2, t.o_plus);
    res[i] = cf * (t.r + batch.gamma * cont - gbar(theta, fm, t.a, t.o));
    anchor[i] = featurize(fm, t.a, po ? t.o_minus : t.o);
    wb[i] = tuple_weight(batch, i) / wsum;
  }

  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      loss += wb[i] * wb[j] * res[i] * res[j] *
              rbf_kernel(anchor[i], anchor[j], beta, squared_norm);
  return loss;
}

struct InitSupport {
  std::vector<Obs> points;
  std::vector<double> w;
};

inline InitSupport init_support(const InitObsDist& init) {
  InitSupport out;
  if (init.exact()) {
    for (Eigen::Index o = 0; o < init.probs.size(); ++o) {
      out.points.push_back(Obs{static_cast<int>(o)});
      out.w.push_back(init.probs[o]);
    }
  } else {
    for (const auto& o : init.samples) {
      out.points.push_back(o);
      out.w.push_back(1.0 / static_cast<double>(init.samples.size()));
    }
  }
  return out;
}

// Double-loop evaluation of the two occupancy-ratio (weight) losses,
// expanding the squared RKHS norm of the embedded moment term by term.
inline double brute_weight_loss(KernelLossKind kind,
                                const Eigen::VectorXd& theta,
                                const TupleDataset& batch,
                                const FeatureMap& fm, const Policy& target,
                                double beta, bool squared_norm) {
  const std::size_t n = batch.tuples.size();
  const int na = fm.num_actions;
  const bool po = kind == KernelLossKind::pomwl;
  const double gamma = batch.gamma;

  const auto k = [&](int a, const Obs& x, int a2, const Obs& y) {
    return rbf_kernel(featurize(fm, a, x), featurize(fm, a2, y), beta,
                      squared_norm);
  };
  const auto kpi = [&](const Obs& x, int a2, const Obs& y) {
    double acc = 0.0;
    for (int a = 0; a < na; ++a)
      acc += policy_prob(target, a, x) * k(a, x, a2, y);
    return acc;
  };
  const auto kpipi = [&](const Obs& x, const Obs& y) {
    double acc = 0.0;
    for (int a2 = 0; a2 < na; ++a2)
      acc += policy_prob(target, a2, y) * kpi(x, a2, y);
    return acc;
  };

  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) wsum += tuple_weight(batch, i);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = batch.tuples[i];
    const double coef = po ? policy_prob(target, t.a, t.o) : 1.0;
    const Obs& at = po ? t.o_minus : t.o;
    c[i] = tuple_weight(batch, i) / wsum * coef * gbar(theta, fm, t.a, at);
  }

  double term1 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const auto& ti = batch.tuples[i];
      const auto& tj = batch.tuples[j];
      const double block = gamma * gamma * kpipi(ti.o_plus, tj.o_plus) +
                           k(ti.a, ti.o, tj.a, tj.o) -
                           gamma * kpi(ti.o_plus, tj.a, tj.o) -
                           gamma * kpi(tj.o_plus, ti.a, ti.o);
      term1 += c[i] * c[j] * block;
    }

  const InitSupport init = init_support(batch.init_obs);
  double term2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = batch.tuples[i];
    double h = 0.0;
    for (std::size_t m = 0; m < init.points.size(); ++m)
      h += init.w[m] * (gamma * kpipi(t.o_plus, init.points[m]) -
                        kpi(init.points[m], t.a, t.o));
    term2 += 2.0 * (1.0 - gamma) * c[i] * h;
  }

  double term3 = 0.0;
  for (std::size_t m = 0; m < init.points.size(); ++m)
    for (std::size_t l = 0; l < init.points.size(); ++l)
      term3 += init.w[m] * init.w[l] * kpipi(init.points[m], init.points[l]);
  term3 *= (1.0 - gamma) * (1.0 - gamma);

  return term1 + term2 + term3;
}

inline double brute_kernel_loss(KernelLossKind kind,
                                const Eigen::VectorXd& theta,
                                const TupleDataset& batch,
                                const FeatureMap& fm, const Policy& target,
                                double beta, bool squared_norm) {
  return is_value_loss(kind)
             ? brute_value_loss(kind, theta, batch, fm, target, beta,
                                squared_norm)
             : brute_weight_loss(kind, theta, batch, fm, target, beta,
                                 squared_norm);
}

inline Eigen::VectorXd fd_gradient(KernelLossKind kind,
                                   const Eigen::VectorXd& theta,
                                   const TupleDataset& batch,
                                   const FeatureMap& fm, const Policy& target,
                                   double beta, bool squared_norm,
                                   double h = 1e-5) {
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd up = theta, dn = theta;
    up[k] += h;
    dn[k] -= h;
    g[k] = (kernel_loss(kind, up, batch, fm, target, beta, squared_norm) -
            kernel_loss(kind, dn, batch, fm, target, beta, squared_norm)) /
           (2.0 * h);
  }
  return g;
}

inline TupleDataset random_continuous_batch(int n, std::uint64_t seed,
                                            double gamma = 0.95,
                                            int init_samples = 4) {
  RandomStream g(seed);
  TupleDataset data;
  for (int i = 0; i < n; ++i) {
    TransitionTuple t;
    t.o_minus = make_obs(g.normal());
    t.o = make_obs(g.normal());
    t.a = static_cast<int>(g.uniform_below(2));
    t.r = g.normal();
    t.o_plus = make_obs(g.normal());
    data.tuples.push_back(t);
  }
  for (int i = 0; i < init_samples; ++i)
    data.init_obs.samples.push_back(make_obs(g.normal()));
  data.n = data.tuples.size();
  data.gamma = gamma;
  data.env_id = "synthetic";
  data.seed = seed;
  return data;
}

inline TupleDataset random_discrete_batch(int n, int num_obs,
                                          std::uint64_t seed,
                                          double gamma = 0.95) {
  RandomStream g(seed);
  TupleDataset data;
  for (int i = 0; i < n; ++i) {
    TransitionTuple t;
    t.o_minus = Obs{static_cast<int>(g.uniform_below(num_obs))};
    t.o = Obs{static_cast<int>(g.uniform_below(num_obs))};
    t.a = static_cast<int>(g.uniform_below(2));
    t.r = g.uniform01();
    t.o_plus = Obs{static_cast<int>(g.uniform_below(num_obs))};
    data.tuples.push_back(t);
  }
  Eigen::VectorXd probs(num_obs);
  for (int o = 0; o < num_obs; ++o) probs[o] = g.uniform_pos();
  data.init_obs.probs = probs / probs.sum();
  data.n = data.tuples.size();
  data.gamma = gamma;
  data.env_id = "synthetic";
  data.seed = seed;
  return data;
}

// Bridge whose table(a, o) is read back verbatim by bridge_value.
inline BridgeFunction matrix_bridge(const Eigen::MatrixXd& table,
                                    BridgeRole role) {
  const int na = static_cast<int>(table.rows());
  const int no = static_cast<int>(table.cols());
  BridgeFunction b;
  b.fm = one_hot_features(na, no);
  b.theta = Eigen::VectorXd::Zero(na * no);
  for (int a = 0; a < na; ++a)
    for (int o = 0; o < no; ++o) b.theta[a * no + o] = table(a, o);
  b.role = role;
  return b;
}

inline double loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("loglog_slope: need matched samples");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace testsupport
