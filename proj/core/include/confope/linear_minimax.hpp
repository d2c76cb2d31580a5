#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "confope/features.hpp"
#include "confope/types.hpp"

namespace confope {

enum class BridgeRole { value, weight };

// A fitted bridge b(a, o) = theta' phi(a, o), optionally reparametrized as
// b(a, o) = pi^e(a|o) theta' phi(a, o) (value bridges only, where the policy
// factor lets one-hot and Fourier classes absorb the target overlap).
struct BridgeFunction {
  FeatureMap fm;
  Eigen::VectorXd theta;
  BridgeRole role = BridgeRole::value;
  std::optional<Policy> reparam_policy;
  std::vector<std::string> warnings;
};

double bridge_value(const BridgeFunction& bridge, int action, const Obs& obs);

// Dataset columns that depend only on (dataset, feature map); reusable across
// target policies when sweeping.
struct FeatureColumns {
  Eigen::MatrixXd f_minus;  // n x block_dim, phi-block of O-
  Eigen::MatrixXd f_o;      // n x block_dim
  Eigen::MatrixXd f_plus;   // n x block_dim
  Eigen::VectorXd reward;
  Eigen::VectorXd weight;  // probability weights, normalized to sum 1
  std::vector<int> actions;
  std::vector<std::vector<int>> by_action;
  double gamma = 0.0;
};

FeatureColumns make_feature_columns(const TupleDataset& data,
                                    const FeatureMap& fm);

// Target-policy columns over the same dataset.
struct PolicyColumns {
  Eigen::MatrixXd pi_o;     // n x A, pi^e(a | O_i)
  Eigen::MatrixXd pi_plus;  // n x A, pi^e(a | O+_i)
  Eigen::VectorXd pa;       // pi^e(A_i | O_i)
};

PolicyColumns make_policy_columns(const TupleDataset& data,
                                  const Policy& target);

// Value bridge: solves the empirical moment system
//   E[phi(A,O-) (psi(A,O) - gamma pi^e(A|O) sum_a' psi(a',O+))'] theta
//     = E[R pi^e(A|O) phi(A,O-)]
// with psi = pi^e . phi when reparametrized, psi = phi otherwise. ridge > 0
// switches the solve to normal equations with lambda = ridge |A|_F^2 / dim;
// ridge = 0 uses the min-norm pseudoinverse solution.
BridgeFunction fit_value_bridge_linear(const TupleDataset& data,
                                       const Policy& target,
                                       const FeatureMap& fm, bool reparam,
                                       double ridge = 0.0);
BridgeFunction fit_value_bridge_linear(const FeatureColumns& cols,
                                       const PolicyColumns& pol,
                                       const Policy& target,
                                       const FeatureMap& fm, bool reparam,
                                       double ridge = 0.0);

// Weight bridge: solves M' theta = -(1-gamma) c over the test class phi_f,
//   M = E[gamma pi^e(A|O) phi_g(A,O-) (sum_a' phi_f(a',O+))'
//         - phi_g(A,O-) phi_f(A,O)'],
//   c = E_{nu_O}[sum_a' phi_f(a', o~)].
BridgeFunction fit_weight_bridge_linear(const TupleDataset& data,
                                        const Policy& target,
                                        const FeatureMap& fm_g,
                                        const FeatureMap& fm_f,
                                        double ridge = 0.0);

enum class ValueKind { vm, is };

// vm: E_{nu_O}[sum_a b_V(a, o~)]; is: (1-gamma)^-1 E[b_W(A,O-) R pi^e(A|O)].
// Standard errors are reported only where sampling noise exists (sampled
// nu_O for vm, unweighted tuples for is).
ValueEstimate estimate_value(ValueKind kind, const BridgeFunction& bridge,
                             const TupleDataset& data, const Policy& target);

struct LstdqResult {
  BridgeFunction q;
  ValueEstimate value;
};

// Confounding-blind baseline: LSTDQ on observations as if they were states,
//   E[phi(A,O)(phi(A,O) - gamma sum_a' pi^e(a'|O+) phi(a',O+))'] theta
//     = E[R phi(A,O)],
// anchored at the initial observation distribution.
LstdqResult lstdq_baseline(const TupleDataset& data, const Policy& target,
                           const FeatureMap& fm, double ridge = 0.0);
LstdqResult lstdq_baseline(const FeatureColumns& cols,
                           const PolicyColumns& pol, const TupleDataset& data,
                           const Policy& target, const FeatureMap& fm,
                           double ridge = 0.0);

// nu_O sample points as a row-per-observation matrix (continuous case).
Eigen::MatrixXd init_obs_points(const InitObsDist& init);

}  // namespace confope
