#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace confope {

// Observation (or latent state) value: discrete index for tabular models,
// real vector for continuous ones. One tagged type keeps the tuple format
// shared across both pipelines.
using Obs = std::variant<int, Eigen::VectorXd>;

inline int obs_index(const Obs& o) { return std::get<int>(o); }
inline const Eigen::VectorXd& obs_vec(const Obs& o) {
  return std::get<Eigen::VectorXd>(o);
}
inline bool obs_is_discrete(const Obs& o) {
  return std::holds_alternative<int>(o);
}
// Scalar view: index as double, or the single coordinate of a 1-d vector.
double obs_scalar(const Obs& o);

Obs make_obs(double x);

enum class InputKind { state_based, observation_based };

// Finite latent-state model <S, A, O, r, P, Z, gamma> plus the initial
// distribution nu. All stochastic rows are validated at construction.
struct TabularPOMDP {
  int num_states = 0;
  int num_obs = 0;
  int num_actions = 0;
  Eigen::VectorXd init_dist;               // nu, length S
  std::vector<Eigen::MatrixXd> transition; // per action: S x S, row s -> P(.|s,a)
  Eigen::MatrixXd reward;                  // S x A, values in [0, r_max]
  Eigen::MatrixXd obs_kernel;              // S x O, row s -> Z(.|s)
  double discount = 0.0;
  double r_max = 0.0;

  TabularPOMDP() = default;
  TabularPOMDP(Eigen::VectorXd init, std::vector<Eigen::MatrixXd> trans,
               Eigen::MatrixXd rew, Eigen::MatrixXd obs, double gamma,
               std::optional<double> r_max_bound = std::nullopt);
};

// One-dimensional Gaussian process: S0 ~ N(init_mean, init_std^2),
// S' = trans_coef*S + action_shift*(2a-1) + N(0, trans_noise_std^2),
// O = S + N(0, obs_noise_std^2), reward R = S + (2a-1).
struct Continuous1DProcess {
  double init_mean = 0.0;
  double init_std = 0.5;
  double trans_coef = 0.5;
  double action_shift = 1.0;
  double trans_noise_std = 0.5;
  double obs_noise_std = 0.0;
  double discount = 0.0;
  // User-supplied reward bound for Monte Carlo truncation; the reward itself
  // is unbounded (Gaussian state), 6.0 covers the stationary range amply.
  double r_max = 6.0;
};

// Two-action policy prob(1|x) = 1/(1+exp(w*x + bias)).
struct SigmoidPolicy {
  double weight = 0.0;
  double bias = 1.0;
  InputKind input_kind = InputKind::state_based;

  double prob(int action, double x) const;
};

struct TabularPolicy {
  Eigen::MatrixXd table;  // rows: input index, cols: actions
  InputKind input_kind = InputKind::state_based;

  TabularPolicy() = default;
  TabularPolicy(Eigen::MatrixXd t, InputKind kind);

  double prob(int action, int input) const { return table(input, action); }
  int num_actions() const { return static_cast<int>(table.cols()); }
};

// Runtime-polymorphic policy handle used by the estimators.
using Policy = std::variant<TabularPolicy, SigmoidPolicy>;

double policy_prob(const Policy& p, int action, const Obs& x);
int policy_num_actions(const Policy& p);
InputKind policy_input_kind(const Policy& p);

// Observed unit (O-, O, A, R, O+).
struct TransitionTuple {
  Obs o_minus;
  Obs o;
  int a = 0;
  double r = 0.0;
  Obs o_plus;
};

// Initial-observation distribution nu_O: exact probability vector for
// tabular environments, sampled values for continuous ones.
struct InitObsDist {
  Eigen::VectorXd probs;    // size num_obs when exact, else empty
  std::vector<Obs> samples; // non-empty when sampled

  bool exact() const { return probs.size() > 0; }
  bool empty() const { return probs.size() == 0 && samples.empty(); }
};

struct TupleDataset {
  std::vector<TransitionTuple> tuples;
  InitObsDist init_obs;
  std::string env_id;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double gamma = 0.0;
  std::size_t skipped_trajectories = 0;
  // Optional per-tuple probability weights (population-moment evaluation);
  // empty means the uniform empirical measure.
  std::vector<double> weights;

  bool weighted() const { return !weights.empty(); }
};

// Bandit record (O-1, A0, O0, R0).
struct BanditTuple {
  int o_minus = 0;
  int a = 0;
  int o = 0;
  double r = 0.0;
};

struct BanditDataset {
  std::vector<BanditTuple> tuples;
  std::vector<double> reward_support;  // sorted distinct observed rewards
  int num_preobs = 0;
  int num_obs = 0;
  int num_actions = 0;
  std::string env_id;
  std::uint64_t seed = 0;
  std::vector<double> weights;  // optional, as in TupleDataset

  bool weighted() const { return !weights.empty(); }
};

enum class Method {
  oracle_exact,
  oracle_mc,
  tabular_pinv,
  vm_linear,
  is_linear,
  lstdq_naive,
  pomql,
  pomwl,
  mql,
  mwl,
  dr,
  dr_crossfit,
};

std::string method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct ValueEstimate {
  double estimate = 0.0;
  std::optional<double> std_error;
  Method method = Method::oracle_exact;
  std::size_t n = 0;
  // Truncation tail bound gamma^H r_max/(1-gamma), present for Monte Carlo.
  std::optional<double> tail_bound;
};

}  // namespace confope
