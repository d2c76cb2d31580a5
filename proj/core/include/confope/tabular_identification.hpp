#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "confope/environments.hpp"
#include "confope/types.hpp"

namespace confope {

// Empirical (or analytic) probability matrices entering the bandit
// identification formula
//   J = sum_{a,r,o} r pi^e(a|o) Pr(r,o | O-1, A0=a) {Pr(O0 | A0=a, O-1)}^+ Pr(O0).
struct BanditProbMatrices {
  std::vector<Eigen::MatrixXd> m_o;   // per action: |O| x |O-|, cols sum to 1
  std::vector<Eigen::MatrixXd> m_ro;  // per action: (levels*|O|) x |O-|,
                                      // row index = level * |O| + o
  Eigen::VectorXd p_o;                // Pr(O0)
  std::vector<double> reward_support; // sorted distinct reward values
  int num_preobs = 0;
  int num_obs = 0;
  int num_actions = 0;
};

// Conditional frequencies with exact-count normalization; smooth > 0 adds
// that amount to every count (Laplace smoothing). Throws when some (a, o-)
// conditioning cell has no samples, naming the empty cells.
BanditProbMatrices estimate_bandit_matrices(const BanditDataset& data,
                                            double smooth = 0.0);

// Analytic matrices for a known model: the population counterpart of the
// estimator above.
BanditProbMatrices population_bandit_matrices(const BanditModel& model);

struct RankDiagnostics {
  std::vector<int> per_action_rank;       // rank of Pr(O0 | A0=a, O-1)
  std::optional<int> obs_rank;            // rank of Pr(O0 | S0), model only
  std::optional<int> preobs_rank;         // rank of Pr(O-1 | S0), model only
  bool pass = false;
  double tol = 0.0;
  // When the true model is available both sides of the rank equivalence are
  // computable; holds = (every per-action rank == |S|) agrees with
  // (obs_rank == |S| and preobs_rank == |S|).
  std::optional<bool> equivalence_holds;

  std::string to_json() const;
};

// Ranks count singular values above tol * sigma_max. With only matrices,
// pass means every per-action matrix has full numerical rank.
RankDiagnostics check_rank_conditions(const BanditModel& model, double tol);
RankDiagnostics check_rank_conditions(const BanditProbMatrices& matrices,
                                      double tol);

// Pseudoinverse cutoff defaults to 1e-10 * sigma_max. Unless force is set,
// throws when check_rank_conditions(matrices, ...) fails, with the
// diagnostics JSON in the message.
double bandit_value_pseudoinverse(const BanditProbMatrices& matrices,
                                  const TabularPolicy& target,
                                  bool force = false,
                                  double pinv_cutoff = 1e-10);

// Sample a bandit dataset: S0 ~ nu, O-1 ~ Z-(.|S0), A0 ~ pi^b(.|S0),
// O0 ~ Z(.|S0), R0 = r(S0, A0).
BanditDataset sample_bandit_dataset(const BanditModel& model, long n,
                                    std::uint64_t seed);

// Direct enumeration J = sum_s nu(s) sum_o Z(o|s) sum_a pi^e(a|o) r(s,a):
// the latent-state oracle the identification formula must reproduce.
double bandit_value_enumeration(const BanditModel& model,
                                const TabularPolicy& target);

}  // namespace confope
