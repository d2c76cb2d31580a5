#include "confope/dr_estimator.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "confope/rng.hpp"

namespace confope {

namespace {

double init_value_term(const BridgeFunction& g, const InitObsDist& init) {
  if (init.empty())
    throw std::invalid_argument("dr_estimate: dataset carries no "
                                "initial-observation distribution");
  const int na = g.fm.num_actions;
  auto sum_over_actions = [&](const Obs& obs) {
    double s = 0.0;
    for (int a = 0; a < na; ++a) s += bridge_value(g, a, obs);
    return s;
  };
  if (init.exact()) {
    double j = 0.0;
    for (Eigen::Index o = 0; o < init.probs.size(); ++o)
      j += init.probs[o] * sum_over_actions(Obs{static_cast<int>(o)});
    return j;
  }
  double j = 0.0;
  for (const auto& obs : init.samples) j += sum_over_actions(obs);
  return j / static_cast<double>(init.samples.size());
}

}  // namespace

double dr_contribution(const BridgeFunction& f, const BridgeFunction& g,
                       const TransitionTuple& tuple, const Policy& target,
                       double gamma) {
  double future = 0.0;
  for (int a = 0; a < g.fm.num_actions; ++a)
    future += bridge_value(g, a, tuple.o_plus);
  const double pa = policy_prob(target, tuple.a, tuple.o);
  const double residual =
      (tuple.r + gamma * future) * pa - bridge_value(g, tuple.a, tuple.o);
  return bridge_value(f, tuple.a, tuple.o_minus) * residual / (1.0 - gamma);
}

ValueEstimate dr_estimate(const BridgeFunction& f, const BridgeFunction& g,
                          const TupleDataset& data, const Policy& target) {
  if (data.tuples.empty())
    throw std::invalid_argument("dr_estimate: empty dataset");
  const double anchor = init_value_term(g, data.init_obs);
  const Eigen::Index n = static_cast<Eigen::Index>(data.tuples.size());
  Eigen::VectorXd vals(n);
  for (Eigen::Index i = 0; i < n; ++i)
    vals[i] = anchor +
              dr_contribution(f, g, data.tuples[i], target, data.gamma);

  ValueEstimate out;
  out.method = Method::dr;
  out.n = data.tuples.size();
  if (data.weighted()) {
    const Eigen::Map<const Eigen::VectorXd> w(data.weights.data(), n);
    out.estimate = vals.dot(w) / w.sum();
  } else {
    out.estimate = vals.mean();
    if (n > 1) {
      const double var =
          (vals.array() - out.estimate).square().sum() / (n - 1);
      out.std_error = std::sqrt(var / n);
    }
  }
  return out;
}

ValueEstimate cross_fit_dr(const TupleDataset& data, const FitProcedure& fit,
                           std::uint64_t split_seed, const Policy& target) {
  const std::size_t n = data.tuples.size();
  if (n < 2)
    throw std::invalid_argument("cross_fit_dr: need at least two tuples");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RandomStream stream = derive_stream(split_seed, "crossfit", 0);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = stream.uniform_below(i + 1);
    std::swap(order[i], order[j]);
  }

  auto subset = [&](std::size_t begin, std::size_t end) {
    TupleDataset fold;
    fold.env_id = data.env_id;
    fold.seed = data.seed;
    fold.gamma = data.gamma;
    fold.init_obs = data.init_obs;
    fold.tuples.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) {
      fold.tuples.push_back(data.tuples[order[k]]);
      if (data.weighted()) fold.weights.push_back(data.weights[order[k]]);
    }
    fold.n = fold.tuples.size();
    return fold;
  };
  const std::size_t half = (n + 1) / 2;
  const TupleDataset fold_a = subset(0, half);
  const TupleDataset fold_b = subset(half, n);

  const BridgePair on_a = fit(fold_a);
  const BridgePair on_b = fit(fold_b);
  const ValueEstimate est_b = dr_estimate(on_a.weight, on_a.value, fold_b,
                                          target);
  const ValueEstimate est_a = dr_estimate(on_b.weight, on_b.value, fold_a,
                                          target);

  ValueEstimate out;
  out.method = Method::dr_crossfit;
  out.n = n;
  out.estimate = 0.5 * (est_a.estimate + est_b.estimate);
  if (est_a.std_error && est_b.std_error)
    out.std_error = std::sqrt(0.25 * *est_a.std_error * *est_a.std_error +
                              0.25 * *est_b.std_error * *est_b.std_error);
  return out;
}

}  // namespace confope
