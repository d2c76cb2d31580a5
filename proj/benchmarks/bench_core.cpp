#include <benchmark/benchmark.h>

#include <vector>

#include <Eigen/Core>

#include "confope/environments.hpp"
#include "confope/features.hpp"
#include "confope/kernel_minimax.hpp"
#include "confope/linear_minimax.hpp"
#include "confope/rng.hpp"
#include "confope/simulation.hpp"

namespace {

using namespace confope;

TupleDataset make_1d_data(long num_traj, double sigma_o, std::uint64_t seed) {
  const Continuous1DProcess env = make_1d_process(sigma_o, 0.95);
  std::vector<Trajectory> trajs;
  trajs.reserve(num_traj);
  for (long t = 0; t < num_traj; ++t) {
    RandomStream stream = derive_stream(seed, "traj", t);
    trajs.push_back(rollout_behavior(env, behavior_1d_policy(), 100, stream));
  }
  TupleDataset data = extract_tuples(trajs);
  data.gamma = env.discount;
  return data;
}

void BM_RolloutToy(benchmark::State& state) {
  const BinaryToy toy = make_binary_confounded_pomdp(0.25, 0.3);
  std::uint64_t t = 0;
  for (auto _ : state) {
    RandomStream stream = derive_stream(1, "traj", t++);
    benchmark::DoNotOptimize(
        rollout_behavior(toy.pomdp, toy.behavior, 100, stream));
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_RolloutToy);

void BM_Rollout1D(benchmark::State& state) {
  const Continuous1DProcess env = make_1d_process(1.0, 0.95);
  const SigmoidPolicy behavior = behavior_1d_policy();
  std::uint64_t t = 0;
  for (auto _ : state) {
    RandomStream stream = derive_stream(2, "traj", t++);
    benchmark::DoNotOptimize(rollout_behavior(env, behavior, 100, stream));
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_Rollout1D);

void BM_FeatureColumns(benchmark::State& state) {
  const TupleDataset data = make_1d_data(state.range(0), 0.5, 3);
  const FeatureMap fm = sample_rff(1, 100, 5.0, 2, 4);
  for (auto _ : state)
    benchmark::DoNotOptimize(make_feature_columns(data, fm));
  state.SetItemsProcessed(state.iterations() * data.tuples.size());
}
BENCHMARK(BM_FeatureColumns)->Arg(100)->Arg(500);

void BM_LinearValueFit(benchmark::State& state) {
  const TupleDataset data = make_1d_data(state.range(0), 0.5, 5);
  const FeatureMap fm = sample_rff(1, 100, 5.0, 2, 6);
  const Policy target{target_1d_policy(1.0)};
  const FeatureColumns cols = make_feature_columns(data, fm);
  const PolicyColumns pol = make_policy_columns(data, target);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        fit_value_bridge_linear(cols, pol, target, fm, true, 1e-8));
  state.SetItemsProcessed(state.iterations() * data.tuples.size());
}
BENCHMARK(BM_LinearValueFit)->Arg(100)->Arg(500);

void BM_LstdqFit(benchmark::State& state) {
  const TupleDataset data = make_1d_data(state.range(0), 0.5, 7);
  const FeatureMap fm = sample_rff(1, 100, 5.0, 2, 8);
  const Policy target{target_1d_policy(1.0)};
  const FeatureColumns cols = make_feature_columns(data, fm);
  const PolicyColumns pol = make_policy_columns(data, target);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        lstdq_baseline(cols, pol, data, target, fm, 1e-8));
  state.SetItemsProcessed(state.iterations() * data.tuples.size());
}
BENCHMARK(BM_LstdqFit)->Arg(100)->Arg(500);

void BM_KernelLoss(benchmark::State& state) {
  TupleDataset data = make_1d_data(10, 0.5, 9);
  data.tuples.resize(static_cast<std::size_t>(state.range(0)));
  data.n = data.tuples.size();
  const FeatureMap fm = sample_rff(1, 25, 5.0, 2, 10);
  const Policy target{target_1d_policy(1.0)};
  RandomStream g(11);
  Eigen::VectorXd theta(fm.dim);
  for (int i = 0; i < fm.dim; ++i) theta[i] = g.normal();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        kernel_loss(KernelLossKind::pomql, theta, data, fm, target, 0.7));
}
BENCHMARK(BM_KernelLoss)->Arg(64)->Arg(256);

void BM_KernelGradient(benchmark::State& state) {
  TupleDataset data = make_1d_data(10, 0.5, 12);
  data.tuples.resize(static_cast<std::size_t>(state.range(0)));
  data.n = data.tuples.size();
  const FeatureMap fm = sample_rff(1, 25, 5.0, 2, 13);
  const Policy target{target_1d_policy(1.0)};
  RandomStream g(14);
  Eigen::VectorXd theta(fm.dim);
  for (int i = 0; i < fm.dim; ++i) theta[i] = g.normal();
  for (auto _ : state)
    benchmark::DoNotOptimize(kernel_loss_gradient(
        KernelLossKind::pomwl, theta, data, fm, target, 0.7));
}
BENCHMARK(BM_KernelGradient)->Arg(64)->Arg(256);

void BM_Certificate(benchmark::State& state) {
  const TupleDataset data = make_1d_data(state.range(0), 0.5, 15);
  const FeatureMap fm = sample_rff(1, 100, 5.0, 2, 16);
  const Policy target{target_1d_policy(1.0)};
  const BridgeFunction bridge =
      fit_value_bridge_linear(data, target, fm, true, 1e-8);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        bellman_residual_certificate(bridge, data, target, 0.7));
  state.SetItemsProcessed(state.iterations() * data.tuples.size() *
                          data.tuples.size());
}
BENCHMARK(BM_Certificate)->Arg(20)->Arg(50);

}  // namespace

BENCHMARK_MAIN();
