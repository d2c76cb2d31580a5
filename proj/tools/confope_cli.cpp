#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "confope/dataset_io.hpp"
#include "confope/dr_estimator.hpp"
#include "confope/environments.hpp"
#include "confope/features.hpp"
#include "confope/harness.hpp"
#include "confope/kernel_minimax.hpp"
#include "confope/linear_minimax.hpp"
#include "confope/rng.hpp"
#include "confope/simulation.hpp"
#include "confope/tabular_identification.hpp"
#include "confope/types.hpp"

namespace {

using namespace confope;

nlohmann::json estimate_json(const ValueEstimate& v) {
  nlohmann::json j;
  j["estimate"] = v.estimate;
  j["std_error"] =
      v.std_error ? nlohmann::json(*v.std_error) : nlohmann::json();
  j["method"] = method_name(v.method);
  j["n"] = v.n;
  j["tail_bound"] =
      v.tail_bound ? nlohmann::json(*v.tail_bound) : nlohmann::json();
  return j;
}

void print_estimate(const ValueEstimate& v) {
  std::cout << estimate_json(v).dump(2) << "\n";
  if (!std::isfinite(v.estimate))
    throw std::runtime_error("estimate is not finite");
}

std::vector<Trajectory> simulate_toy(double epsilon, double obs_flip,
                                     long trajectories, int horizon,
                                     std::uint64_t seed, BinaryToy* out_toy) {
  const BinaryToy toy = make_binary_confounded_pomdp(epsilon, obs_flip);
  std::vector<Trajectory> trajs;
  trajs.reserve(trajectories);
  for (long t = 0; t < trajectories; ++t) {
    RandomStream stream = derive_stream(seed, "traj", t);
    trajs.push_back(rollout_behavior(toy.pomdp, toy.behavior, horizon, stream));
  }
  if (out_toy) *out_toy = toy;
  return trajs;
}

std::vector<Trajectory> simulate_1d(double sigma_o, long trajectories,
                                    int horizon, std::uint64_t seed) {
  const Continuous1DProcess env = make_1d_process(sigma_o, 0.95);
  std::vector<Trajectory> trajs;
  trajs.reserve(trajectories);
  for (long t = 0; t < trajectories; ++t) {
    RandomStream stream = derive_stream(seed, "traj", t);
    trajs.push_back(rollout_behavior(env, behavior_1d_policy(), horizon,
                                     stream));
  }
  return trajs;
}

struct EvalArgs {
  std::string data_path;
  std::string method;
  double target_w = 0.0;
  double gamma = 0.0;  // 0: take the dataset sidecar value
  int rff_d = 100;
  double rff_gamma = 5.0;
  double ridge = -1.0;  // < 0: 0 for one-hot data, 1e-8 for Fourier
  long iterations = 10000;
  double learning_rate = 5e-3;
  int batch_size = 256;
  std::string trace_path;
};

int dataset_num_actions(const TupleDataset& data) {
  int a_max = 1;
  for (const auto& t : data.tuples) a_max = std::max(a_max, t.a);
  return a_max + 1;
}

int dataset_num_obs(const TupleDataset& data) {
  int o_max = 0;
  for (const auto& t : data.tuples) {
    o_max = std::max(o_max, obs_index(t.o_minus));
    o_max = std::max(o_max, obs_index(t.o));
    o_max = std::max(o_max, obs_index(t.o_plus));
  }
  if (data.init_obs.exact())
    o_max = std::max(o_max, static_cast<int>(data.init_obs.probs.size()) - 1);
  return o_max + 1;
}

void run_evaluate(const EvalArgs& args) {
  TupleDataset data = read_tuples_csv(args.data_path);
  if (data.tuples.empty())
    throw std::invalid_argument("dataset has no tuples");
  if (args.gamma != 0.0) {
    if (!(args.gamma > 0.0 && args.gamma < 1.0))
      throw std::invalid_argument("--gamma must lie in (0, 1)");
    data.gamma = args.gamma;
  }
  if (!(data.gamma > 0.0 && data.gamma < 1.0))
    throw std::invalid_argument(
        "dataset metadata carries no discount; pass --gamma");

  const bool discrete = obs_is_discrete(data.tuples[0].o);
  const int num_actions = dataset_num_actions(data);

  Policy target = discrete
                      ? Policy(TabularPolicy(
                            Eigen::MatrixXd::Constant(
                                dataset_num_obs(data), num_actions,
                                1.0 / num_actions),
                            InputKind::observation_based))
                      : Policy(target_1d_policy(args.target_w));
  const FeatureMap fm =
      discrete ? one_hot_features(num_actions, dataset_num_obs(data))
               : sample_rff(1, args.rff_d, args.rff_gamma, num_actions,
                            derive_seed(data.seed, "eval-rff", 0));
  const double ridge =
      args.ridge >= 0.0 ? args.ridge : (discrete ? 0.0 : 1e-8);
  const bool reparam = !discrete;

  const std::string& m = args.method;
  if (m == "vm") {
    const BridgeFunction b_v =
        fit_value_bridge_linear(data, target, fm, reparam, ridge);
    print_estimate(estimate_value(ValueKind::vm, b_v, data, target));
  } else if (m == "is") {
    const BridgeFunction b_w =
        fit_weight_bridge_linear(data, target, fm, fm, ridge);
    print_estimate(estimate_value(ValueKind::is, b_w, data, target));
  } else if (m == "lstdq") {
    print_estimate(lstdq_baseline(data, target, fm, ridge).value);
  } else if (m == "dr" || m == "dr-crossfit") {
    const auto fit = [&](const TupleDataset& fold) {
      BridgePair pair;
      pair.weight = fit_weight_bridge_linear(fold, target, fm, fm, ridge);
      pair.value = fit_value_bridge_linear(fold, target, fm, reparam, ridge);
      return pair;
    };
    if (m == "dr") {
      const BridgePair pair = fit(data);
      print_estimate(dr_estimate(pair.weight, pair.value, data, target));
    } else {
      print_estimate(
          cross_fit_dr(data, fit, derive_seed(data.seed, "crossfit-split", 0),
                       target));
    }
  } else if (m == "pomql" || m == "pomwl" || m == "mql" || m == "mwl") {
    const KernelLossKind kind =
        m == "pomql" ? KernelLossKind::pomql
        : m == "pomwl" ? KernelLossKind::pomwl
        : m == "mql" ? KernelLossKind::mql
                     : KernelLossKind::mwl;
    TrainOptions opts;
    opts.iterations = args.iterations;
    opts.learning_rate = args.learning_rate;
    opts.batch_size = args.batch_size;
    opts.seed = derive_seed(data.seed, "kernel-train", 0);
    const TrainResult res = train_bridge_kernel(kind, data, fm, target, opts);
    if (!args.trace_path.empty()) write_trace_csv(args.trace_path, res.trace);
    ValueEstimate est;
    if (kind == KernelLossKind::mwl) {
      // Unconfounded weight estimate (1-gamma)^-1 E[w(A,O) R]: no policy
      // factor, unlike the proxy form served by estimate_value.
      double acc = 0.0;
      for (const auto& t : data.tuples)
        acc += bridge_value(res.bridge, t.a, t.o) * t.r;
      est.estimate = acc / (data.tuples.size() * (1.0 - data.gamma));
      est.n = data.tuples.size();
    } else if (kind == KernelLossKind::pomwl) {
      est = estimate_value(ValueKind::is, res.bridge, data, target);
    } else {
      est = estimate_value(ValueKind::vm, res.bridge, data, target);
    }
    est.method = kind == KernelLossKind::pomql ? Method::pomql
                 : kind == KernelLossKind::pomwl ? Method::pomwl
                 : kind == KernelLossKind::mql ? Method::mql
                                               : Method::mwl;
    print_estimate(est);
  } else {
    throw std::invalid_argument("unknown method '" + m + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy evaluation for confounded POMDPs"};
  app.require_subcommand(1);

  // oracle
  auto* oracle = app.add_subcommand(
      "oracle", "Ground-truth policy value (exact or Monte Carlo)");
  std::string o_env;
  double o_eps = 0.5, o_flip = 0.3, o_sigma = 1.0, o_w = 0.0;
  long o_rollouts = 0;
  int o_horizon = 0;
  std::uint64_t o_seed = 0;
  oracle->add_option("--env", o_env, "toy or dyn1d")->required();
  oracle->add_option("--epsilon", o_eps, "toy confounding level");
  oracle->add_option("--obs-flip", o_flip, "toy observation flip probability");
  oracle->add_option("--sigma-o", o_sigma, "dyn1d observation noise");
  auto* o_w_opt =
      oracle->add_option("--policy-w", o_w, "dyn1d target sigmoid weight");
  oracle->add_option("--rollouts", o_rollouts,
                     "Monte Carlo rollouts; 0 = exact (toy only)");
  oracle->add_option("--horizon", o_horizon,
                     "truncation horizon; 0 = discount-derived");
  oracle->add_option("--seed", o_seed, "rollout seed");
  oracle->callback([&] {
    if (o_env == "toy") {
      if (o_w_opt->count() > 0)
        throw std::invalid_argument("--policy-w applies to --env dyn1d");
      const BinaryToy toy = make_binary_confounded_pomdp(o_eps, o_flip);
      if (o_rollouts <= 0) {
        ValueEstimate est;
        est.estimate = exact_tabular_value(toy.pomdp, Policy(toy.target)).j;
        est.method = Method::oracle_exact;
        print_estimate(est);
      } else {
        const int h = o_horizon > 0
                          ? o_horizon
                          : default_truncation_horizon(toy.pomdp.discount,
                                                       toy.pomdp.r_max);
        print_estimate(monte_carlo_value(toy.pomdp, Policy(toy.target),
                                         o_rollouts, h, o_seed));
      }
    } else if (o_env == "dyn1d") {
      if (o_w_opt->count() == 0)
        throw std::invalid_argument("--env dyn1d needs --policy-w");
      if (o_rollouts <= 0)
        throw std::invalid_argument(
            "the dyn1d oracle is Monte Carlo; pass --rollouts");
      const Continuous1DProcess env = make_1d_process(o_sigma, 0.95);
      const int h = o_horizon > 0
                        ? o_horizon
                        : default_truncation_horizon(env.discount, env.r_max);
      print_estimate(
          monte_carlo_value(env, target_1d_policy(o_w), o_rollouts, h,
                            o_seed));
    } else {
      throw std::invalid_argument("--env must be toy or dyn1d");
    }
  });

  // simulate
  auto* sim = app.add_subcommand(
      "simulate", "Generate a behavior-policy dataset CSV");
  std::string s_env, s_out;
  double s_eps = 0.5, s_flip = 0.3, s_sigma = 1.0;
  long s_traj = 1000, s_draws = 10000;
  int s_horizon = 100, s_states = 2, s_obs = 2, s_actions = 2;
  std::uint64_t s_seed = 0;
  sim->add_option("--env", s_env, "toy, dyn1d or bandit")->required();
  sim->add_option("--out", s_out, "output CSV path")->required();
  sim->add_option("--epsilon", s_eps, "toy confounding level");
  sim->add_option("--obs-flip", s_flip, "toy observation flip probability");
  sim->add_option("--sigma-o", s_sigma, "dyn1d observation noise");
  sim->add_option("--trajectories", s_traj, "trajectory count");
  sim->add_option("--horizon", s_horizon, "steps per trajectory");
  sim->add_option("--draws", s_draws, "bandit sample count");
  sim->add_option("--states", s_states, "bandit latent states");
  sim->add_option("--obs", s_obs, "bandit observation levels");
  sim->add_option("--actions", s_actions, "bandit actions");
  sim->add_option("--seed", s_seed, "sampling seed");
  sim->callback([&] {
    if (s_env == "toy") {
      BinaryToy toy;
      const auto trajs =
          simulate_toy(s_eps, s_flip, s_traj, s_horizon, s_seed, &toy);
      TupleDataset data = extract_tuples(trajs, toy.pomdp);
      data.env_id = "toy";
      data.seed = s_seed;
      write_tuples_csv(s_out, data);
    } else if (s_env == "dyn1d") {
      const auto trajs = simulate_1d(s_sigma, s_traj, s_horizon, s_seed);
      TupleDataset data = extract_tuples(trajs);
      data.gamma = 0.95;
      data.env_id = "dyn1d";
      data.seed = s_seed;
      write_tuples_csv(s_out, data);
    } else if (s_env == "bandit") {
      const BanditModel model =
          make_random_bandit_pomdp(s_states, s_obs, s_actions, s_seed);
      BanditDataset data =
          sample_bandit_dataset(model, s_draws, derive_seed(s_seed, "data", 0));
      data.env_id = "bandit";
      write_bandit_csv(s_out, data);
    } else {
      throw std::invalid_argument("--env must be toy, dyn1d or bandit");
    }
    std::cout << "wrote " << s_out << "\n";
  });

  // toy-table
  auto* toy_cmd = app.add_subcommand(
      "toy-table", "Binary-toy comparison table (truth, proposed, naive)");
  ToyTableConfig toy_cfg;
  std::string t_out;
  toy_cmd->add_option("--out", t_out, "output CSV path")->required();
  toy_cmd->add_option("--seed", toy_cfg.seed, "simulation seed");
  toy_cmd->add_option("--epsilon-list", toy_cfg.epsilon_list,
                      "confounding levels");
  toy_cmd->add_option("--trajectories", toy_cfg.num_trajectories,
                      "trajectories per level");
  toy_cmd->add_option("--horizon", toy_cfg.horizon, "steps per trajectory");
  toy_cmd->add_option("--obs-flip", toy_cfg.obs_flip,
                      "observation flip probability");
  toy_cmd->callback([&] {
    const auto rows = run_toy_table(toy_cfg);
    write_toy_table_csv(t_out, rows);
    std::printf("%10s %12s %12s %12s\n", "epsilon", "truth", "proposed",
                "naive");
    for (const auto& r : rows)
      std::printf("%10.4g %12.6g %12.6g %12.6g\n", r.epsilon, r.truth,
                  r.proposed, r.naive);
  });

  // sweep-1d
  auto* sweep = app.add_subcommand(
      "sweep-1d", "Replication sweep on the 1D process");
  std::string w_config, w_out, w_summary;
  sweep->add_option("--config", w_config, "JSON config path")->required();
  sweep->add_option("--out", w_out, "raw rows CSV path")->required();
  sweep->add_option("--summary", w_summary, "summary CSV path")->required();
  sweep->callback([&] {
    std::ifstream in(w_config);
    if (!in) throw std::invalid_argument("cannot open " + w_config);
    std::stringstream buf;
    buf << in.rdbuf();
    const SweepConfig cfg = parse_sweep_config(buf.str());
    const auto rows = run_1d_sweep(cfg);
    write_sweep_csv(w_out, rows);
    write_sweep_summary_csv(w_summary, summarize_sweep(rows));
    std::cout << "wrote " << w_out << " and " << w_summary << "\n";
  });

  // evaluate
  auto* ev = app.add_subcommand(
      "evaluate", "Off-policy value estimate from a tuple CSV");
  EvalArgs ea;
  ev->add_option("--data", ea.data_path, "tuple CSV path")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--method", ea.method,
                 "vm|is|dr|dr-crossfit|lstdq|pomql|pomwl|mql|mwl")
      ->required();
  ev->add_option("--target-w", ea.target_w,
                 "sigmoid target weight (continuous observations)");
  ev->add_option("--gamma", ea.gamma,
                 "discount override; defaults to the dataset sidecar");
  ev->add_option("--rff-d", ea.rff_d, "Fourier features per action");
  ev->add_option("--rff-gamma", ea.rff_gamma, "Gaussian kernel gamma");
  ev->add_option("--ridge", ea.ridge,
                 "ridge scale; negative = per-feature-class default");
  ev->add_option("--iterations", ea.iterations, "kernel SGD iterations");
  ev->add_option("--learning-rate", ea.learning_rate, "kernel SGD step size");
  ev->add_option("--batch-size", ea.batch_size, "kernel SGD minibatch size");
  ev->add_option("--trace", ea.trace_path, "write the training trace CSV here");
  ev->callback([&] { run_evaluate(ea); });

  // rank-check
  auto* rank = app.add_subcommand(
      "rank-check", "Identifiability diagnostics for a bandit CSV");
  std::string r_data;
  double r_tol = 1e-8, r_smooth = 0.0;
  rank->add_option("--data", r_data, "bandit CSV path")
      ->required()
      ->check(CLI::ExistingFile);
  rank->add_option("--tol", r_tol, "relative singular-value cutoff");
  rank->add_option("--smooth", r_smooth, "Laplace smoothing for cell counts");
  rank->callback([&] {
    const BanditDataset data = read_bandit_csv(r_data);
    const BanditProbMatrices mats = estimate_bandit_matrices(data, r_smooth);
    std::cout << check_rank_conditions(mats, r_tol).to_json() << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
