#include "confope/kernel_minimax.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"

#include "confope/environments.hpp"
#include "confope/features.hpp"
#include "confope/linear_minimax.hpp"
#include "confope/rng.hpp"
#include "confope/simulation.hpp"
#include "confope/tabular_oracle.hpp"
#include "support.hpp"

using namespace confope;
using testsupport::brute_kernel_loss;
using testsupport::fd_gradient;
using testsupport::random_continuous_batch;
using testsupport::random_discrete_batch;

namespace {

const KernelLossKind kAllKinds[] = {KernelLossKind::pomql,
                                    KernelLossKind::pomwl,
                                    KernelLossKind::mql, KernelLossKind::mwl};

Eigen::VectorXd random_theta(int dim, std::uint64_t seed) {
  RandomStream g(seed);
  Eigen::VectorXd t(dim);
  for (int i = 0; i < dim; ++i) t[i] = g.normal();
  return t;
}

}  // namespace

TEST_SUITE("kernel_minimax") {

TEST_CASE("rbf kernel basics") {
  Eigen::VectorXd x(2), y(2);
  x << 0.3, -1.0;
  y << 0.5, 0.2;
  CHECK(rbf_kernel(x, x, 0.7) == doctest::Approx(1.0));
  CHECK(rbf_kernel(x, y, 0.7) == doctest::Approx(rbf_kernel(y, x, 0.7)));
  const double d = (x - y).norm();
  CHECK(rbf_kernel(x, y, 0.7) ==
        doctest::Approx(std::exp(-d / (2.0 * 0.49))).epsilon(1e-12));
  CHECK(rbf_kernel(x, y, 0.7, true) ==
        doctest::Approx(std::exp(-d * d / (2.0 * 0.49))).epsilon(1e-12));
  CHECK_THROWS(rbf_kernel(x, y, 0.0));
  CHECK_THROWS(rbf_kernel(x, Eigen::VectorXd::Zero(3), 0.7));
}

TEST_CASE("squared-norm gram matrices are positive semidefinite") {
  RandomStream g(3);
  const int n = 20;
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v(3);
    for (int k = 0; k < 3; ++k) v[k] = g.normal();
    pts.push_back(v);
  }
  Eigen::MatrixXd gram(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      gram(i, j) = rbf_kernel(pts[i], pts[j], 0.8, true);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("median heuristic equals brute-force enumeration") {
  RandomStream g(5);
  Eigen::MatrixXd pts(101, 2);
  for (int i = 0; i < 101; ++i)
    for (int k = 0; k < 2; ++k) pts(i, k) = g.normal();

  std::vector<double> dists;
  for (int i = 0; i < 101; ++i)
    for (int j = i + 1; j < 101; ++j)
      dists.push_back((pts.row(i) - pts.row(j)).norm());
  std::sort(dists.begin(), dists.end());
  const double med = dists[(dists.size() - 1) / 2];

  CHECK(median_heuristic(pts, 5.0) == doctest::Approx(med / 5.0));
  CHECK(median_heuristic(pts, 2.0) == doctest::Approx(med / 2.0));
}

TEST_CASE("median heuristic falls back on duplicate point clouds") {
  Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(4, 2);
  std::vector<std::string> warnings;
  CHECK(median_heuristic(pts, 5.0, &warnings) == doctest::Approx(1.0));
  CHECK(!warnings.empty());
  CHECK_THROWS(median_heuristic(pts, 0.0));
  CHECK_THROWS(median_heuristic(Eigen::MatrixXd::Zero(1, 2), 5.0));
}

TEST_CASE("all four losses match the brute-force double loop") {
  const SigmoidPolicy target = target_1d_policy(1.0);
  const FeatureMap fm = sample_rff(1, 3, 2.0, 2, 111);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const TupleDataset batch = random_continuous_batch(5, 900 + seed);
    const Eigen::VectorXd theta = random_theta(fm.dim, 40 + seed);
    const double beta = 0.6;
    for (KernelLossKind kind : kAllKinds) {
      for (bool sq : {false, true}) {
        const double fast =
            kernel_loss(kind, theta, batch, fm, target, beta, sq);
        const double slow =
            brute_kernel_loss(kind, theta, batch, fm, target, beta, sq);
        CHECK(std::abs(fast - slow) <= 1e-12 * std::max(1.0, std::abs(slow)));
      }
    }
  }
}

TEST_CASE("losses match the brute force on discrete one-hot data") {
  const BinaryToy toy = make_binary_confounded_pomdp(0.3, 0.2);
  const FeatureMap fm = one_hot_features(2, 2);
  const TupleDataset batch = random_discrete_batch(6, 2, 77);
  const Eigen::VectorXd theta = random_theta(fm.dim, 50);
  for (KernelLossKind kind : kAllKinds) {
    const double fast = kernel_loss(kind, theta, batch, fm, toy.target, 0.9);
    const double slow =
        brute_kernel_loss(kind, theta, batch, fm, toy.target, 0.9, false);
    CHECK(std::abs(fast - slow) <= 1e-12 * std::max(1.0, std::abs(slow)));
  }
}

TEST_CASE("weighted batches renormalize inside the loss") {
  const SigmoidPolicy target = target_1d_policy(-2.0);
  const FeatureMap fm = sample_rff(1, 3, 2.0, 2, 13);
  TupleDataset batch = random_continuous_batch(5, 21);
  RandomStream g(8);
  for (int i = 0; i < 5; ++i) batch.weights.push_back(g.uniform_pos());
  const Eigen::VectorXd theta = random_theta(fm.dim, 9);
  for (KernelLossKind kind : kAllKinds) {
    const double fast = kernel_loss(kind, theta, batch, fm, target, 0.5);
    const double slow =
        brute_kernel_loss(kind, theta, batch, fm, target, 0.5, false);
    CHECK(std::abs(fast - slow) <= 1e-12 * std::max(1.0, std::abs(slow)));
  }
}

TEST_CASE("value losses are nonnegative and vanish on zero residuals") {
  const SigmoidPolicy target = target_1d_policy(1.0);
  const FeatureMap fm = sample_rff(1, 4, 2.0, 2, 5);
  TupleDataset batch = random_continuous_batch(8, 33);
  for (auto& t : batch.tuples) t.r = 0.0;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(fm.dim);
  for (KernelLossKind kind : {KernelLossKind::pomql, KernelLossKind::mql}) {
    CHECK(kernel_loss(kind, zero, batch, fm, target, 0.7) ==
          doctest::Approx(0.0));
    const Eigen::VectorXd theta = random_theta(fm.dim, 60);
    CHECK(kernel_loss(kind, theta, batch, fm, target, 0.7, true) > -1e-12);
  }
}

TEST_CASE("losses are invariant to tuple order") {
  const SigmoidPolicy target = target_1d_policy(2.0);
  const FeatureMap fm = sample_rff(1, 3, 2.0, 2, 71);
  const TupleDataset batch = random_continuous_batch(6, 44);
  TupleDataset shuffled = batch;
  std::reverse(shuffled.tuples.begin(), shuffled.tuples.end());
  const Eigen::VectorXd theta = random_theta(fm.dim, 70);
  for (KernelLossKind kind : kAllKinds) {
    const double a = kernel_loss(kind, theta, batch, fm, target, 0.5);
    const double b = kernel_loss(kind, theta, shuffled, fm, target, 0.5);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  const SigmoidPolicy target = target_1d_policy(1.0);
  const FeatureMap fm = sample_rff(1, 3, 2.0, 2, 19);
  const TupleDataset batch = random_continuous_batch(50, 55);
  for (KernelLossKind kind : kAllKinds) {
    const Eigen::VectorXd theta = random_theta(fm.dim, 80);
    const Eigen::VectorXd grad =
        kernel_loss_gradient(kind, theta, batch, fm, target, 0.6);
    const Eigen::VectorXd fd =
        fd_gradient(kind, theta, batch, fm, target, 0.6, false);
    CHECK((grad - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("discounting off reduces the value loss to a bandit residual") {
  // With gamma = 0 the continuation term disappears and the pomql residual
  // is the importance-weighted regression residual pa (R - g(A, O)).
  const SigmoidPolicy target = target_1d_policy(1.0);
  const FeatureMap fm = sample_rff(1, 3, 2.0, 2, 23);
  TupleDataset batch = random_continuous_batch(6, 66, 0.0);
  const Eigen::VectorXd theta = random_theta(fm.dim, 90);

  double expected = 0.0;
  std::vector<double> res(batch.tuples.size());
  std::vector<Eigen::VectorXd> anchor(batch.tuples.size());
  for (std::size_t i = 0; i < batch.tuples.size(); ++i) {
    const auto& t = batch.tuples[i];
    const double pa = policy_prob(target, t.a, t.o);
    res[i] = pa * (t.r - theta.dot(featurize(fm, t.a, t.o)));
    anchor[i] = featurize(fm, t.a, t.o_minus);
  }
  const double wb = 1.0 / static_cast<double>(batch.tuples.size());
  for (std::size_t i = 0; i < res.size(); ++i)
    for (std::size_t j = 0; j < res.size(); ++j)
      expected += wb * wb * res[i] * res[j] *
                  rbf_kernel(anchor[i], anchor[j], 0.5);
  CHECK(kernel_loss(KernelLossKind::pomql, theta, batch, fm, target, 0.5) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("loss rejects invalid inputs") {
  const SigmoidPolicy target = target_1d_policy(1.0);
  const FeatureMap fm = sample_rff(1, 3, 2.0, 2, 29);
  const TupleDataset batch = random_continuous_batch(4, 31);
  const Eigen::VectorXd theta = random_theta(fm.dim, 17);
  CHECK_THROWS(kernel_loss(KernelLossKind::mql, theta, batch, fm, target, 0.0));
  CHECK_THROWS(kernel_loss(KernelLossKind::mql,
                           Eigen::VectorXd::Zero(fm.dim + 1), batch, fm,
                           target, 0.5));
  TupleDataset empty_init = batch;
  empty_init.init_obs = InitObsDist{};
  CHECK_THROWS(kernel_loss(KernelLossKind::mwl, theta, empty_init, fm, target,
                           0.5));
}

TEST_CASE("training is deterministic in the seed") {
  const BinaryToy toy = make_binary_confounded_pomdp(0.25, 0.3);
  const TupleDataset data = [&] {
    std::vector<Trajectory> trajs;
    for (int t = 0; t < 40; ++t) {
      RandomStream g = derive_stream(3, "traj", t);
      trajs.push_back(rollout_behavior(toy.pomdp, toy.behavior, 40, g));
    }
    return extract_tuples(trajs, toy.pomdp);
  }();
  const FeatureMap fm = one_hot_features(2, 2);
  TrainOptions opts;
  opts.iterations = 300;
  opts.batch_size = 32;
  opts.eval_every = 50;
  opts.seed = 5;

  const TrainResult a =
      train_bridge_kernel(KernelLossKind::pomql, data, fm, toy.target, opts);
  const TrainResult b =
      train_bridge_kernel(KernelLossKind::pomql, data, fm, toy.target, opts);
  REQUIRE(a.trace.size() == b.trace.size());
  REQUIRE(a.trace.size() == 6);
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].iteration == b.trace[i].iteration);
    CHECK(a.trace[i].loss == b.trace[i].loss);
    CHECK(a.trace[i].value_estimate == b.trace[i].value_estimate);
  }
  CHECK((a.bridge.theta - b.bridge.theta).norm() == 0.0);
  CHECK(a.beta == b.beta);

  TrainOptions other = opts;
  other.seed = 6;
  const TrainResult c =
      train_bridge_kernel(KernelLossKind::pomql, data, fm, toy.target, other);
  CHECK((a.bridge.theta - c.bridge.theta).norm() > 0.0);
}

TEST_CASE("trained bridges carry the advertised roles") {
  const BinaryToy toy = make_binary_confounded_pomdp(0.25, 0.3);
  const TupleDataset data = [&] {
    std::vector<Trajectory> trajs;
    for (int t = 0; t < 30; ++t) {
      RandomStream g = derive_stream(4, "traj", t);
      trajs.push_back(rollout_behavior(toy.pomdp, toy.behavior, 30, g));
    }
    return extract_tuples(trajs, toy.pomdp);
  }();
  const FeatureMap fm = one_hot_features(2, 2);
  TrainOptions opts;
  opts.iterations = 50;
  opts.batch_size = 16;
  opts.eval_every = 10;

  const TrainResult q = train_bridge_kernel(KernelLossKind::pomql, data, fm,
                                            toy.target, opts);
  CHECK(q.bridge.role == BridgeRole::value);
  CHECK(q.bridge.reparam_policy.has_value());
  const TrainResult mq =
      train_bridge_kernel(KernelLossKind::mql, data, fm, toy.target, opts);
  CHECK(mq.bridge.reparam_policy.has_value());
  const TrainResult w = train_bridge_kernel(KernelLossKind::pomwl, data, fm,
                                            toy.target, opts);
  CHECK(w.bridge.role == BridgeRole::weight);
  CHECK(!w.bridge.reparam_policy.has_value());
  CHECK(w.beta > 0.0);

  CHECK_THROWS(train_bridge_kernel(KernelLossKind::pomql, TupleDataset{}, fm,
                                   toy.target, opts));
  TrainOptions bad = opts;
  bad.learning_rate = 0.0;
  CHECK_THROWS(train_bridge_kernel(KernelLossKind::pomql, data, fm, toy.target,
                                   bad));
}

TEST_CASE("certificate vanishes on the oracle bridge over population data") {
  const BinaryToy toy = make_binary_confounded_pomdp(0.25, 0.3);
  const TupleDataset pop =
      population_tuple_dataset(toy.pomdp, toy.behavior, 100);
  const TabularOracleBridges br =
      tabular_oracle_bridges(toy.pomdp, toy.behavior, toy.target, 100);
  const BridgeFunction bv =
      testsupport::matrix_bridge(br.b_value, BridgeRole::value);
  const double cert =
      bellman_residual_certificate(bv, pop, toy.target, 0.8);
  CHECK(std::abs(cert) <= 1e-12);

  // A visibly wrong bridge certifies as such.
  Eigen::MatrixXd off = br.b_value;
  off.array() += 1.0;
  const BridgeFunction bad = testsupport::matrix_bridge(off, BridgeRole::value);
  CHECK(bellman_residual_certificate(bad, pop, toy.target, 0.8) > 1e-4);
}

TEST_CASE("certificate equals the pomql loss on the full batch") {
  const SigmoidPolicy target = target_1d_policy(1.0);
  const FeatureMap fm = sample_rff(1, 4, 2.0, 2, 37);
  const TupleDataset data = random_continuous_batch(300, 202);

  BridgeFunction bridge;
  bridge.fm = fm;
  bridge.theta = random_theta(fm.dim, 11);
  bridge.role = BridgeRole::value;
  bridge.reparam_policy = target;

  const double cert = bellman_residual_certificate(bridge, data, target, 0.7);
  const double loss = kernel_loss(KernelLossKind::pomql, bridge.theta, data,
                                  fm, target, 0.7);
  CHECK(cert == doctest::Approx(loss).epsilon(1e-9));
}

TEST_CASE("trace loss descends from start to finish at the defaults") {
  const BinaryToy toy = make_binary_confounded_pomdp(0.25, 0.3);
  const TupleDataset data = [&] {
    std::vector<Trajectory> trajs;
    for (int t = 0; t < 50; ++t) {
      RandomStream g = derive_stream(12, "traj", t);
      trajs.push_back(rollout_behavior(toy.pomdp, toy.behavior, 100, g));
    }
    return extract_tuples(trajs, toy.pomdp);
  }();
  const FeatureMap fm = one_hot_features(2, 2);
  TrainOptions opts;  // spec defaults: lr 5e-3, 10000 iterations, batch 256
  opts.seed = 1;
  const TrainResult res =
      train_bridge_kernel(KernelLossKind::pomql, data, fm, toy.target, opts);
  REQUIRE(res.trace.size() == 100);
  CHECK(res.trace.front().iteration == 100);
  CHECK(res.trace.back().iteration == 10000);
  CHECK(res.trace.back().loss <= res.trace.front().loss);
}

TEST_CASE("sgd converges to the minimizer of its batch-expected objective") {
  // The minibatch objective is an exact quadratic in theta whose batch
  // expectation we can estimate by averaging gradients at theta = 0 and at
  // unit vectors. Constant-step SGD with tail averaging must land on that
  // quadratic's minimizer, not on the full-data loss minimizer (the
  // V-statistic diagonal shifts the two apart at small batch sizes).
  const BinaryToy toy = make_binary_confounded_pomdp(0.25, 0.3);
  const TupleDataset data = [&] {
    std::vector<Trajectory> trajs;
    for (int t = 0; t < 50; ++t) {
      RandomStream g = derive_stream(13, "traj", t);
      trajs.push_back(rollout_behavior(toy.pomdp, toy.behavior, 100, g));
    }
    return extract_tuples(trajs, toy.pomdp);
  }();
  const FeatureMap fm = one_hot_features(2, 2);
  const int dim = fm.dim;
  const int m = 16;
  const double beta = 0.9;

  // Quadratic extraction: E[grad](theta) = 2 H theta + 2 c.
  const int probes = 800;
  Eigen::VectorXd g0 = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd gu = Eigen::MatrixXd::Zero(dim, dim);
  for (int b = 0; b < probes; ++b) {
    RandomStream bs = derive_stream(99, "probe", b);
    TupleDataset batch;
    batch.gamma = data.gamma;
    batch.init_obs = data.init_obs;
    for (int k = 0; k < m; ++k)
      batch.tuples.push_back(
          data.tuples[bs.uniform_below(data.tuples.size())]);
    batch.n = batch.tuples.size();
    g0 += kernel_loss_gradient(KernelLossKind::pomql,
                               Eigen::VectorXd::Zero(dim), batch, fm,
                               toy.target, beta);
    for (int k = 0; k < dim; ++k)
      gu.col(k) += kernel_loss_gradient(KernelLossKind::pomql,
                                        Eigen::VectorXd::Unit(dim, k), batch,
                                        fm, toy.target, beta);
  }
  g0 /= probes;
  gu /= probes;
  const Eigen::VectorXd c = 0.5 * g0;
  Eigen::MatrixXd h(dim, dim);
  for (int k = 0; k < dim; ++k) h.col(k) = 0.5 * (gu.col(k) - g0);
  const Eigen::VectorXd target_theta = -h.ldlt().solve(c);

  TrainOptions opts;
  opts.learning_rate = 0.5;
  opts.iterations = 80000;
  opts.batch_size = m;
  opts.eval_every = 200;
  opts.avg_last = 200;
  opts.beta = beta;
  opts.seed = 3;
  const TrainResult res =
      train_bridge_kernel(KernelLossKind::pomql, data, fm, toy.target, opts);
  CHECK((res.bridge.theta - target_theta).norm() <
        0.05 * (1.0 + target_theta.norm()));
}

TEST_CASE("trace csv round trips through the writer") {
  std::vector<TrainRecord> trace{{100, 1.5, 9.0}, {200, 0.75, 9.5}};
  const std::string path = "/tmp/confope_test_trace.csv";
  write_trace_csv(path, trace);
  std::FILE* f = std::fopen(path.c_str(), "r");
  REQUIRE(f != nullptr);
  char header[128];
  REQUIRE(std::fgets(header, sizeof(header), f) != nullptr);
  CHECK(std::string(header).find("iteration") != std::string::npos);
  long it = 0;
  double loss = 0.0, val = 0.0;
  REQUIRE(std::fscanf(f, "%ld,%lf,%lf\n", &it, &loss, &val) == 3);
  CHECK(it == 100);
  CHECK(loss == doctest::Approx(1.5));
  std::fclose(f);
  std::remove(path.c_str());
}

}  // TEST_SUITE
