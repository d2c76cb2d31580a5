#include "confope/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "confope/environments.hpp"
#include "confope/features.hpp"
#include "confope/linear_minimax.hpp"
#include "confope/metrics.hpp"
#include "confope/rng.hpp"
#include "confope/simulation.hpp"

namespace confope {

namespace {

constexpr int kSweepHorizon = 100;
constexpr double kSweepGamma = 0.95;
constexpr double kSweepRidge = 1e-8;
const double kNan = std::numeric_limits<double>::quiet_NaN();

std::FILE* open_or_throw(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  return f;
}

}  // namespace

std::uint64_t value_key(double x) {
  std::uint64_t bits = 0;
  static_assert(sizeof(bits) == sizeof(x));
  std::memcpy(&bits, &x, sizeof(bits));
  return bits;
}

std::vector<ToyTableRow> run_toy_table(const ToyTableConfig& config) {
  if (config.num_trajectories <= 0 || config.horizon < 3)
    throw std::invalid_argument("run_toy_table: need trajectories and a "
                                "horizon of at least 3");
  std::vector<ToyTableRow> rows;
  for (double eps : config.epsilon_list) {
    const BinaryToy toy = make_binary_confounded_pomdp(eps, config.obs_flip);
    const Policy target{toy.target};
    ToyTableRow row;
    row.epsilon = eps;
    row.truth = exact_tabular_value(toy.pomdp, target).j;

    const std::uint64_t seed =
        derive_seed(config.seed, "toy", value_key(eps));
    std::vector<Trajectory> trajs;
    trajs.reserve(config.num_trajectories);
    for (long t = 0; t < config.num_trajectories; ++t) {
      RandomStream stream = derive_stream(seed, "traj", t);
      trajs.push_back(rollout_behavior(toy.pomdp, toy.behavior,
                                       config.horizon, stream));
    }
    const TupleDataset data = extract_tuples(trajs, toy.pomdp);

    const FeatureMap fm =
        one_hot_features(toy.pomdp.num_actions, toy.pomdp.num_obs);
    const BridgeFunction b_v =
        fit_value_bridge_linear(data, target, fm, /*reparam=*/false);
    row.proposed = estimate_value(ValueKind::vm, b_v, data, target).estimate;
    row.naive = lstdq_baseline(data, target, fm).value.estimate;
    rows.push_back(row);
  }
  return rows;
}

void write_toy_table_csv(const std::string& path,
                         const std::vector<ToyTableRow>& rows) {
  std::FILE* f = open_or_throw(path);
  std::fprintf(f, "epsilon,truth,proposed,naive\n");
  for (const auto& r : rows)
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g\n", r.epsilon, r.truth,
                 r.proposed, r.naive);
  std::fclose(f);
}

SweepConfig parse_sweep_config(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("sweep config: ") + e.what());
  }
  if (!doc.is_object())
    throw std::invalid_argument("sweep config: expected a JSON object");

  SweepConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (key == "sigma_o_list") {
      cfg.sigma_o_list = value.get<std::vector<double>>();
    } else if (key == "w_list") {
      cfg.w_list = value.get<std::vector<double>>();
    } else if (key == "n_list") {
      cfg.n_list = value.get<std::vector<long>>();
    } else if (key == "replications") {
      cfg.replications = value.get<int>();
    } else if (key == "master_seed") {
      cfg.master_seed = value.get<std::uint64_t>();
    } else if (key == "rff") {
      if (!value.is_object())
        throw std::invalid_argument("sweep config: rff must be an object");
      for (const auto& [rk, rv] : value.items()) {
        if (rk == "gamma_k")
          cfg.rff.gamma_k = rv.get<double>();
        else if (rk == "d" || rk == "D")
          cfg.rff.d = rv.get<int>();
        else if (rk == "seeds")
          cfg.rff.seeds = rv.get<int>();
        else
          throw std::invalid_argument("sweep config: unknown rff key '" + rk +
                                      "'");
      }
    } else {
      throw std::invalid_argument("sweep config: unknown key '" + key + "'");
    }
  }
  if (cfg.sigma_o_list.empty() || cfg.w_list.empty() || cfg.n_list.empty())
    throw std::invalid_argument("sweep config: sigma_o_list, w_list and "
                                "n_list are required and non-empty");
  for (double w : cfg.w_list)
    if (w != -3.0 && w != -2.0 && w != 1.0 && w != 2.0)
      throw std::invalid_argument("sweep config: w_list entries must be in "
                                  "{-3, -2, 1, 2}");
  for (double s : cfg.sigma_o_list)
    if (!(s >= 0.0))
      throw std::invalid_argument("sweep config: sigma_o must be >= 0");
  for (long n : cfg.n_list)
    if (n < 3 * kSweepHorizon)
      throw std::invalid_argument("sweep config: n must cover at least three "
                                  "trajectories");
  if (cfg.replications <= 0)
    throw std::invalid_argument("sweep config: replications must be positive");
  if (cfg.rff.seeds <= 0 || cfg.rff.d <= 0 || !(cfg.rff.gamma_k > 0.0))
    throw std::invalid_argument("sweep config: invalid rff block");
  return cfg;
}

std::vector<SweepRow> run_1d_sweep(const SweepConfig& config) {
  // Re-validate so programmatic configs obey the same contract as parsed
  // ones.
  if (config.sigma_o_list.empty() || config.w_list.empty() ||
      config.n_list.empty())
    throw std::invalid_argument(
        "run_1d_sweep: sigma_o_list, w_list and n_list must be non-empty");
  for (double w : config.w_list)
    if (w != -3.0 && w != -2.0 && w != 1.0 && w != 2.0)
      throw std::invalid_argument("run_1d_sweep: w must be in {-3, -2, 1, 2}");
  for (double s : config.sigma_o_list)
    if (!(s >= 0.0))
      throw std::invalid_argument("run_1d_sweep: sigma_o must be >= 0");
  for (long n : config.n_list)
    if (n < 3 * kSweepHorizon)
      throw std::invalid_argument(
          "run_1d_sweep: n must cover at least three trajectories");
  if (config.replications <= 0 || config.rff.seeds <= 0 ||
      config.rff.d <= 0 || !(config.rff.gamma_k > 0.0))
    throw std::invalid_argument("run_1d_sweep: invalid configuration");

  // Truth per (sigma_o, w): long-horizon Monte Carlo under the target.
  std::map<std::pair<double, double>, double> truth;
  for (double sigma : config.sigma_o_list) {
    const Continuous1DProcess env = make_1d_process(sigma, kSweepGamma);
    const int h = default_truncation_horizon(kSweepGamma, env.r_max);
    for (double w : config.w_list) {
      const std::uint64_t seed_t = derive_seed(
          derive_seed(config.master_seed, "truth-sigma", value_key(sigma)),
          "truth-w", value_key(w));
      truth[{sigma, w}] =
          monte_carlo_value(env, target_1d_policy(w), 1000000, h, seed_t)
              .estimate;
    }
  }

  std::vector<SweepRow> rows;
  for (double sigma : config.sigma_o_list) {
    const Continuous1DProcess env = make_1d_process(sigma, kSweepGamma);
    for (long n : config.n_list) {
      const long num_traj = std::lround(static_cast<double>(n) /
                                        kSweepHorizon);
      for (int rep = 0; rep < config.replications; ++rep) {
        const std::uint64_t seed_d = derive_seed(
            derive_seed(
                derive_seed(config.master_seed, "data-sigma",
                            value_key(sigma)),
                "data-n", static_cast<std::uint64_t>(n)),
            "data-rep", static_cast<std::uint64_t>(rep));
        std::vector<Trajectory> trajs;
        trajs.reserve(num_traj);
        for (long t = 0; t < num_traj; ++t) {
          RandomStream stream = derive_stream(seed_d, "traj", t);
          trajs.push_back(rollout_behavior(env, behavior_1d_policy(),
                                           kSweepHorizon, stream));
        }
        TupleDataset data = extract_tuples(trajs);
        data.gamma = kSweepGamma;
        data.env_id = "dyn1d";
        data.seed = seed_d;

        std::vector<Policy> targets;
        std::vector<PolicyColumns> pols;
        for (double w : config.w_list) {
          targets.emplace_back(target_1d_policy(w));
          pols.push_back(make_policy_columns(data, targets.back()));
        }

        std::vector<double> sum_vm(config.w_list.size(), 0.0);
        std::vector<double> sum_naive(config.w_list.size(), 0.0);
        std::vector<bool> failed_vm(config.w_list.size(), false);
        std::vector<bool> failed_naive(config.w_list.size(), false);
        for (int s = 0; s < config.rff.seeds; ++s) {
          const FeatureMap fm = sample_rff(
              1, config.rff.d, config.rff.gamma_k, 2,
              derive_seed(config.master_seed, "rff-seed",
                          static_cast<std::uint64_t>(s)));
          const FeatureColumns cols = make_feature_columns(data, fm);
          for (std::size_t wi = 0; wi < config.w_list.size(); ++wi) {
            try {
              const BridgeFunction b_v = fit_value_bridge_linear(
                  cols, pols[wi], targets[wi], fm, /*reparam=*/true,
                  kSweepRidge);
              sum_vm[wi] +=
                  estimate_value(ValueKind::vm, b_v, data, targets[wi])
                      .estimate;
            } catch (const std::exception&) {
              failed_vm[wi] = true;
            }
            try {
              sum_naive[wi] += lstdq_baseline(cols, pols[wi], data,
                                              targets[wi], fm, kSweepRidge)
                                   .value.estimate;
            } catch (const std::exception&) {
              failed_naive[wi] = true;
            }
          }
        }

        for (std::size_t wi = 0; wi < config.w_list.size(); ++wi) {
          const double t = truth.at({sigma, config.w_list[wi]});
          SweepRow row;
          row.env = "dyn1d";
          row.sigma_o = sigma;
          row.w = config.w_list[wi];
          row.n = n;
          row.replication = rep;
          row.truth = t;
          row.method = "vm_linear";
          row.estimate =
              failed_vm[wi] ? kNan : sum_vm[wi] / config.rff.seeds;
          rows.push_back(row);
          row.method = "lstdq_naive";
          row.estimate =
              failed_naive[wi] ? kNan : sum_naive[wi] / config.rff.seeds;
          rows.push_back(row);
        }
      }
    }
  }

  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.sigma_o, a.w, a.n, a.replication, a.method) <
           std::tie(b.sigma_o, b.w, b.n, b.replication, b.method);
  });
  return rows;
}

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows) {
  std::FILE* f = open_or_throw(path);
  std::fprintf(f, "env,sigma_o,w,n,replication,method,estimate,truth\n");
  for (const auto& r : rows)
    std::fprintf(f, "%s,%.17g,%.17g,%ld,%d,%s,%.17g,%.17g\n", r.env.c_str(),
                 r.sigma_o, r.w, r.n, r.replication, r.method.c_str(),
                 r.estimate, r.truth);
  std::fclose(f);
}

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "env,sigma_o,w,n,replication,method,estimate,truth")
    throw std::runtime_error("unexpected sweep CSV header in " + path);
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    SweepRow r;
    std::string field;
    std::getline(ls, r.env, ',');
    std::getline(ls, field, ',');
    r.sigma_o = std::stod(field);
    std::getline(ls, field, ',');
    r.w = std::stod(field);
    std::getline(ls, field, ',');
    r.n = std::stol(field);
    std::getline(ls, field, ',');
    r.replication = std::stoi(field);
    std::getline(ls, r.method, ',');
    std::getline(ls, field, ',');
    r.estimate = std::stod(field);
    std::getline(ls, field, ',');
    r.truth = std::stod(field);
    rows.push_back(r);
  }
  return rows;
}

std::vector<SweepSummaryRow> summarize_sweep(
    const std::vector<SweepRow>& rows) {
  std::map<std::tuple<double, double, long, std::string>,
           std::pair<std::vector<double>, double>>
      groups;
  for (const auto& r : rows) {
    auto& g = groups[{r.sigma_o, r.w, r.n, r.method}];
    g.first.push_back(r.estimate);
    g.second = r.truth;
  }
  std::vector<SweepSummaryRow> out;
  for (const auto& [key, g] : groups) {
    SweepSummaryRow s;
    s.sigma_o = std::get<0>(key);
    s.w = std::get<1>(key);
    s.n = std::get<2>(key);
    s.method = std::get<3>(key);
    s.replications = static_cast<int>(g.first.size());
    s.rel_bias = relative_bias(g.first, g.second);
    s.rel_mse = relative_mse(g.first, g.second);
    s.ci_halfwidth = ci_halfwidth(g.first, g.second);
    out.push_back(s);
  }
  return out;
}

void write_sweep_summary_csv(const std::string& path,
                             const std::vector<SweepSummaryRow>& rows) {
  std::FILE* f = open_or_throw(path);
  std::fprintf(f,
               "sigma_o,w,n,method,replications,rel_bias,rel_mse,"
               "ci_halfwidth\n");
  for (const auto& r : rows)
    std::fprintf(f, "%.17g,%.17g,%ld,%s,%d,%.17g,%.17g,%.17g\n", r.sigma_o,
                 r.w, r.n, r.method.c_str(), r.replications, r.rel_bias,
                 r.rel_mse, r.ci_halfwidth);
  std::fclose(f);
}

}  // namespace confope
