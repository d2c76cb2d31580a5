#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "confope/types.hpp"

namespace confope {

struct ToyTableConfig {
  std::vector<double> epsilon_list{0.25, 0.5, 0.75};
  std::uint64_t seed = 0;
  long num_trajectories = 10000;
  int horizon = 100;
  double obs_flip = 0.3;
};

struct ToyTableRow {
  double epsilon = 0.0;
  double truth = 0.0;     // exact latent-state value
  double proposed = 0.0;  // one-hot linear VM estimate
  double naive = 0.0;     // observation-as-state lstdq
};

std::vector<ToyTableRow> run_toy_table(const ToyTableConfig& config);
void write_toy_table_csv(const std::string& path,
                         const std::vector<ToyTableRow>& rows);

struct RffSweepConfig {
  double gamma_k = 5.0;
  int d = 100;
  int seeds = 5;
};

// gamma is fixed at 0.95 and the harvesting horizon at 100 steps per
// trajectory; n counts raw behavior steps, so trajectories = round(n/100).
struct SweepConfig {
  std::vector<double> sigma_o_list;
  std::vector<double> w_list;
  std::vector<long> n_list;
  int replications = 10;
  std::uint64_t master_seed = 0;
  RffSweepConfig rff;
};

// Parses the JSON document {sigma_o_list, w_list, n_list, replications,
// master_seed, rff: {gamma_k, d, seeds}}; unknown keys are rejected.
SweepConfig parse_sweep_config(const std::string& json_text);

struct SweepRow {
  std::string env;
  double sigma_o = 0.0;
  double w = 0.0;
  long n = 0;
  int replication = 0;
  std::string method;      // vm_linear or lstdq_naive
  double estimate = 0.0;   // NaN flags a failed fit
  double truth = 0.0;
};

// Per (sigma_o, n, replication) one behavior dataset is simulated and shared
// across all w; each method averages the estimates of rff.seeds feature
// draws. Truth per (sigma_o, w) comes from a 1e6-rollout Monte Carlo oracle.
// Every cell's seeds are derived from the parameter values themselves, so a
// single cell rerun reproduces the sweep's row bitwise. Rows are returned
// sorted by (sigma_o, w, n, replication, method).
std::vector<SweepRow> run_1d_sweep(const SweepConfig& config);

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(const std::string& path);

struct SweepSummaryRow {
  double sigma_o = 0.0;
  double w = 0.0;
  long n = 0;
  std::string method;
  int replications = 0;
  double rel_bias = 0.0;
  double rel_mse = 0.0;
  double ci_halfwidth = 0.0;  // +-2 standard errors over replications
};

std::vector<SweepSummaryRow> summarize_sweep(const std::vector<SweepRow>& rows);
void write_sweep_summary_csv(const std::string& path,
                             const std::vector<SweepSummaryRow>& rows);

// Hash-combines a double's bit pattern into a seed tag so that seeds depend
// on parameter values, not list positions.
std::uint64_t value_key(double x);

}  // namespace confope
