#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "confope/linear_minimax.hpp"
#include "confope/types.hpp"

namespace confope {

// Median pairwise Euclidean distance between the rows of points, divided by
// divisor. Even pair counts take the lower middle element. A zero median
// falls back to bandwidth 1.0 and records a warning.
double median_heuristic(const Eigen::MatrixXd& points, double divisor,
                        std::vector<std::string>* warnings = nullptr);

// K(x, y) = exp(-|x-y| / (2 beta^2)); squared_norm uses |x-y|^2 instead.
double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  double beta, bool squared_norm = false);

// pomql / pomwl condition on (A, O-) as the past; mql / mwl are the
// confounding-blind variants conditioning on (A, O). Value losses (pomql,
// mql) square a Bellman-type residual against an RKHS ball; weight losses
// (pomwl, mwl) embed the occupancy moment including its initial-distribution
// terms.
enum class KernelLossKind { pomql, pomwl, mql, mwl };

bool is_value_loss(KernelLossKind kind);

// V-statistic kernel loss over all ordered tuple pairs of the batch
// (diagonal included), honoring dataset weights. Materializes the batch Gram
// matrix: use on minibatches; bellman_residual_certificate provides the
// blocked full-data path.
double kernel_loss(KernelLossKind kind, const Eigen::VectorXd& theta,
                   const TupleDataset& batch, const FeatureMap& fm,
                   const Policy& target, double beta,
                   bool squared_norm = false);

// Analytic gradient of kernel_loss in theta (the losses are quadratic).
Eigen::VectorXd kernel_loss_gradient(KernelLossKind kind,
                                     const Eigen::VectorXd& theta,
                                     const TupleDataset& batch,
                                     const FeatureMap& fm,
                                     const Policy& target, double beta,
                                     bool squared_norm = false);

struct TrainRecord {
  long iteration = 0;
  double loss = 0.0;            // minibatch loss entering the iteration
  double value_estimate = 0.0;  // full-data plug-in value at updated theta
};

struct TrainOptions {
  double learning_rate = 5e-3;
  long iterations = 10000;
  int batch_size = 256;
  int eval_every = 100;
  int avg_last = 10;          // parameter averaging over trailing records
  int median_subsample = 2000;
  bool squared_norm = false;
  double beta = 0.0;          // <= 0 selects the median heuristic
  std::uint64_t seed = 0;
};

struct TrainResult {
  BridgeFunction bridge;
  std::vector<TrainRecord> trace;
  double beta = 0.0;
  std::vector<std::string> warnings;
};

// Minibatch SGD on the chosen loss. Batches are drawn with replacement from
// streams derived per iteration, so runs are reproducible from the seed. The
// returned bridge averages the parameters snapshotted at the trace records.
TrainResult train_bridge_kernel(KernelLossKind kind, const TupleDataset& data,
                                const FeatureMap& fm, const Policy& target,
                                const TrainOptions& opts);

// Full-data pomql loss of an arbitrary value bridge: a model-free witness of
// the Bellman residual conditioned on the past. Evaluated in action-grouped
// tiles so the n x n Gram is never materialized.
double bellman_residual_certificate(const BridgeFunction& bridge,
                                    const TupleDataset& data,
                                    const Policy& target, double beta,
                                    bool squared_norm = false);

void write_trace_csv(const std::string& path,
                     const std::vector<TrainRecord>& trace);

}  // namespace confope
