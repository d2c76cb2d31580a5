#include "confope/tabular_oracle.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"

#include "confope/environments.hpp"
#include "confope/linear_minimax.hpp"
#include "confope/rng.hpp"
#include "confope/simulation.hpp"
#include "support.hpp"

using namespace confope;
using testsupport::matrix_bridge;

namespace {

constexpr int kHorizon = 100;

}  // namespace

TEST_SUITE("tabular_oracle") {

TEST_CASE("tuple joint and backward kernel are proper distributions") {
  const BinaryToy toy = make_binary_confounded_pomdp(0.3, 0.25);
  const Eigen::MatrixXd joint =
      tuple_prev_state_joint(toy.pomdp, toy.behavior, kHorizon);
  CHECK(joint.sum() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK((joint.array() >= 0.0).all());

  const Eigen::MatrixXd back =
      backward_obs_kernel(toy.pomdp, toy.behavior, kHorizon);
  for (int s = 0; s < 2; ++s)
    CHECK(back.row(s).sum() == doctest::Approx(1.0).epsilon(1e-10));

  // Marginalizing the previous state out of the joint recovers the tuple
  // state occupancy.
  const Eigen::VectorXd occ =
      tuple_state_occupancy(toy.pomdp, toy.behavior, kHorizon);
  for (int s = 0; s < 2; ++s)
    CHECK(joint.col(s).sum() == doctest::Approx(occ[s]).epsilon(1e-10));
}

TEST_CASE("backward kernel matches Bayes on the tuple joint") {
  const BinaryToy toy = make_binary_confounded_pomdp(0.3, 0.25);
  const Eigen::MatrixXd joint =
      tuple_prev_state_joint(toy.pomdp, toy.behavior, kHorizon);
  const Eigen::MatrixXd back =
      backward_obs_kernel(toy.pomdp, toy.behavior, kHorizon);
  // Pr(O_minus = om | S = s) = sum_sp Pr(S_prev = sp | S = s) Z(sp, om).
  for (int s = 0; s < 2; ++s) {
    const double mass = joint.col(s).sum();
    for (int om = 0; om < 2; ++om) {
      double p = 0.0;
      for (int sp = 0; sp < 2; ++sp)
        p += joint(sp, s) / mass * toy.pomdp.obs_kernel(sp, om);
      CHECK(back(s, om) == doctest::Approx(p).epsilon(1e-10));
    }
  }
}

TEST_CASE("oracle bridges solve their defining linear restrictions") {
  const BinaryToy toy = make_binary_confounded_pomdp(0.25, 0.3);
  const TabularPOMDP& env = toy.pomdp;
  const TabularOracleBridges br =
      tabular_oracle_bridges(env, toy.behavior, toy.target, kHorizon);
  const ExactTabularValue ex =
      exact_tabular_value(env, toy.target, &toy.behavior, kHorizon);
  const Eigen::MatrixXd pi_s = marginalized_target(env, toy.target);

  // Value bridge: E[b_V(a, O) | S = s] = pi~(a|s) q(a, s).
  for (int a = 0; a < 2; ++a)
    for (int s = 0; s < 2; ++s) {
      double lhs = 0.0;
      for (int o = 0; o < 2; ++o) lhs += env.obs_kernel(s, o) * br.b_value(a, o);
      CHECK(lhs == doctest::Approx(pi_s(s, a) * ex.latent_q(a, s))
                       .epsilon(1e-9));
    }

  // Weight bridge: E[b_W(a, O_minus) | S = s] = (1-gamma) w(s) / pi^b(a|s),
  // through the backward observation kernel. The target enters the IS
  // estimator separately, so it does not appear here.
  const Eigen::MatrixXd back =
      backward_obs_kernel(env, toy.behavior, kHorizon);
  for (int a = 0; a < 2; ++a)
    for (int s = 0; s < 2; ++s) {
      double lhs = 0.0;
      for (int om = 0; om < 2; ++om) lhs += back(s, om) * br.b_weight(a, om);
      const double rhs = (1.0 - env.discount) * ex.occupancy_ratio[s] /
                         policy_prob(toy.behavior, a, Obs{s});
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("population dataset reproduces analytic moments") {
  const BinaryToy toy = make_binary_confounded_pomdp(0.25, 0.3);
  const TabularPOMDP& env = toy.pomdp;
  const TupleDataset pop =
      population_tuple_dataset(env, toy.behavior, kHorizon);
  REQUIRE(pop.weighted());
  CHECK(pop.n == pop.tuples.size());
  CHECK(pop.gamma == doctest::Approx(0.95));
  double total = 0.0;
  for (double w : pop.weights) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));

  // E[R 1{A=a}] = sum_s occ(s) pi_b(a|s) r(s, a), coded directly.
  const Eigen::VectorXd occ =
      tuple_state_occupancy(env, toy.behavior, kHorizon);
  for (int a = 0; a < 2; ++a) {
    double expect = 0.0;
    for (int s = 0; s < 2; ++s)
      expect += occ[s] * policy_prob(toy.behavior, a, Obs{s}) *
                env.reward(s, a);
    double got = 0.0;
    for (std::size_t i = 0; i < pop.tuples.size(); ++i)
      if (pop.tuples[i].a == a) got += pop.weights[i] * pop.tuples[i].r;
    CHECK(got == doctest::Approx(expect).epsilon(1e-10));
  }

  // Sampled trajectories approach the same moments.
  RandomStream g(31);
  std::vector<Trajectory> trajs;
  for (int t = 0; t < 3000; ++t)
    trajs.push_back(rollout_behavior(env, toy.behavior, kHorizon, g));
  const TupleDataset sampled = extract_tuples(trajs, env);
  for (int a = 0; a < 2; ++a) {
    double expect = 0.0;
    for (std::size_t i = 0; i < pop.tuples.size(); ++i)
      if (pop.tuples[i].a == a) expect += pop.weights[i] * pop.tuples[i].r;
    double got = 0.0;
    for (const auto& t : sampled.tuples)
      if (t.a == a) got += t.r;
    got /= static_cast<double>(sampled.n);
    CHECK(std::abs(got - expect) < 0.01);
  }
}

TEST_CASE("plug-in estimates from oracle bridges hit the exact value") {
  for (double eps : {0.25, 0.5, 0.75}) {
    const BinaryToy toy = make_binary_confounded_pomdp(eps, 0.3);
    const double exact = exact_tabular_value(toy.pomdp, toy.target).j;
    const TabularOracleBridges br =
        tabular_oracle_bridges(toy.pomdp, toy.behavior, toy.target, kHorizon);
    const TupleDataset pop =
        population_tuple_dataset(toy.pomdp, toy.behavior, kHorizon);

    const BridgeFunction bv = matrix_bridge(br.b_value, BridgeRole::value);
    const ValueEstimate vm = estimate_value(ValueKind::vm, bv, pop, toy.target);
    CHECK(vm.estimate == doctest::Approx(exact).epsilon(1e-9));

    const BridgeFunction bw = matrix_bridge(br.b_weight, BridgeRole::weight);
    const ValueEstimate is = estimate_value(ValueKind::is, bw, pop, toy.target);
    CHECK(is.estimate == doctest::Approx(exact).epsilon(1e-9));
  }
}

TEST_CASE("occupancy ratio certifies the weight-bridge normalization") {
  const BinaryToy toy = make_binary_confounded_pomdp(0.4, 0.2);
  const ExactTabularValue ex =
      exact_tabular_value(toy.pomdp, toy.target, &toy.behavior, kHorizon);
  REQUIRE(ex.occupancy_ratio.size() == 2);
  const Eigen::VectorXd occ =
      tuple_state_occupancy(toy.pomdp, toy.behavior, kHorizon);
  // The unnormalized discounted occupancy integrates to 1/(1-gamma), so the
  // ratio averages to that under the tuple distribution.
  CHECK(occ.dot(ex.occupancy_ratio) ==
        doctest::Approx(1.0 / (1.0 - toy.pomdp.discount)).epsilon(1e-9));
}

}  // TEST_SUITE
