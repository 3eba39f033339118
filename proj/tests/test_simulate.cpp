#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "cmdp/csv.hpp"
#include "cmdp/gridworld.hpp"
#include "cmdp/simulate.hpp"
#include "cmdp/unconstrained.hpp"
#include "test_support.hpp"

using cmdp::ConstraintSpec;
using cmdp::Matrix;
using cmdp::MdpModel;
using cmdp::Policy;
using cmdp::PolicyKind;
using cmdp::Vector;

namespace {

Policy uniform_policy(const MdpModel& model) {
  Policy policy;
  policy.kind = PolicyKind::randomized;
  for (std::size_t t = 0; t < model.num_epochs(); ++t)
    policy.stages.push_back(test_support::uniform_rule(model));
  return policy;
}

}  // namespace

TEST_CASE("identity dynamics leave the density fixed") {
  MdpModel model;
  model.n = 3;
  model.p = 2;
  model.horizon = 5;
  model.transitions = {{Matrix::identity(3), Matrix::identity(3)}};
  model.rewards = {Matrix(3, 2, 0.0)};
  model.terminal_reward = Vector(3, 0.0);

  const Vector x1 = {0.2, 0.3, 0.5};
  const auto trajectory = cmdp::propagate(model, uniform_policy(model), x1);
  for (const Vector& x : trajectory.x) CHECK(x == x1);
}

TEST_CASE("a swap policy alternates the density") {
  MdpModel model;
  model.n = 2;
  model.p = 2;
  model.horizon = 4;
  Matrix swap(2, 2);
  swap(0, 1) = 1.0;
  swap(1, 0) = 1.0;
  model.transitions = {{Matrix::identity(2), swap}};
  model.rewards = {Matrix(2, 2, 0.0)};
  model.terminal_reward = {0.0, 0.0};

  Policy policy;
  policy.kind = PolicyKind::deterministic;
  Matrix pick_swap(2, 2);
  pick_swap(0, 1) = 1.0;
  pick_swap(1, 1) = 1.0;
  policy.stages.assign(3, pick_swap);

  const Vector x1 = {0.9, 0.1};
  const auto trajectory = cmdp::propagate(model, policy, x1);
  CHECK(trajectory.x[0] == x1);
  CHECK_THAT(trajectory.x[1][0], Catch::Matchers::WithinAbs(0.1, 1e-15));
  CHECK(trajectory.x[2] == trajectory.x[0]);
  CHECK(trajectory.x[3] == trajectory.x[1]);
}

TEST_CASE("propagate rejects incompatible inputs") {
  MdpModel model;
  model.n = 2;
  model.p = 1;
  model.horizon = 2;
  model.transitions = {{Matrix::identity(2)}};
  model.rewards = {Matrix(2, 1, 0.0)};
  model.terminal_reward = {0.0, 0.0};
  const Policy policy = uniform_policy(model);

  CHECK_THROWS_AS(cmdp::propagate(model, policy, {0.5, 0.5, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(cmdp::propagate(model, policy, {0.7, 0.7}), std::invalid_argument);
  Policy wrong = policy;
  wrong.stages.clear();
  CHECK_THROWS_AS(cmdp::propagate(model, wrong, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("expected_reward with no decision epoch is the terminal average") {
  MdpModel model;
  model.n = 2;
  model.p = 1;
  model.horizon = 1;
  model.terminal_reward = {2.0, -1.0};
  Policy empty;
  empty.kind = PolicyKind::deterministic;
  CHECK_THAT(cmdp::expected_reward(model, empty, {0.25, 0.75}),
             Catch::Matchers::WithinAbs(0.25 * 2.0 - 0.75, 1e-15));
}

TEST_CASE("expected_reward on the stay/swap reference instance") {
  MdpModel model;
  model.n = 2;
  model.p = 2;
  model.horizon = 2;
  Matrix swap(2, 2);
  swap(0, 1) = 1.0;
  swap(1, 0) = 1.0;
  model.transitions = {{Matrix::identity(2), swap}};
  Matrix r(2, 2);
  r(0, 0) = 1.0;
  r(1, 1) = 2.0;
  model.rewards = {r};
  model.terminal_reward = {0.0, 1.0};

  Policy swap_from_state_1;  // the enumeration optimum for a start in state 1
  swap_from_state_1.kind = PolicyKind::deterministic;
  Matrix q(2, 2);
  q(0, 0) = 1.0;
  q(1, 1) = 1.0;
  swap_from_state_1.stages = {q};
  CHECK_THAT(cmdp::expected_reward(model, swap_from_state_1, {0.0, 1.0}),
             Catch::Matchers::WithinAbs(2.0, 1e-15));
}

TEST_CASE("expected_reward is affine in the start density") {
  test_support::SplitMix64 rng(70);
  test_support::ModelParams params;
  params.n = 4;
  params.p = 2;
  params.horizon = 4;
  const MdpModel model = test_support::random_model(rng, params);
  const Policy policy = uniform_policy(model);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector a = test_support::random_simplex(rng, 4);
    const Vector b = test_support::random_simplex(rng, 4);
    const double lambda = rng.next_double();
    Vector mix(4);
    for (std::size_t i = 0; i < 4; ++i) mix[i] = lambda * a[i] + (1.0 - lambda) * b[i];
    const double lhs = cmdp::expected_reward(model, policy, mix);
    const double rhs = lambda * cmdp::expected_reward(model, policy, a) +
                       (1.0 - lambda) * cmdp::expected_reward(model, policy, b);
    CHECK_THAT(lhs, Catch::Matchers::WithinAbs(rhs, 1e-9));
  }
}

TEST_CASE("mass is conserved along every trajectory") {
  test_support::SplitMix64 rng(71);
  test_support::ModelParams params;
  params.n = 5;
  params.p = 3;
  params.horizon = 6;
  const MdpModel model = test_support::random_model(rng, params);
  const auto trajectory =
      cmdp::propagate(model, uniform_policy(model), test_support::random_simplex(rng, 5));
  for (const Vector& x : trajectory.x) {
    CHECK_THAT(cmdp::sum(x), Catch::Matchers::WithinAbs(1.0, 1e-9));
    for (double e : x) CHECK(e >= -1e-12);
  }
}

TEST_CASE("monte_carlo on a degenerate chain is exact with zero spread") {
  MdpModel model;
  model.n = 1;
  model.p = 1;
  model.horizon = 3;
  model.transitions = {{Matrix(1, 1, 1.0)}};
  model.rewards = {Matrix(1, 1, 2.5)};
  model.terminal_reward = {1.0};
  const Policy policy = uniform_policy(model);

  const auto estimate = cmdp::monte_carlo(model, policy, {1.0}, 100, 7);
  CHECK(estimate.mean == 6.0);
  CHECK(estimate.std_error == 0.0);
}

TEST_CASE("monte_carlo is reproducible for a fixed seed") {
  test_support::SplitMix64 rng(72);
  test_support::ModelParams params;
  params.n = 3;
  params.p = 2;
  params.horizon = 4;
  const MdpModel model = test_support::random_model(rng, params);
  const Policy policy = uniform_policy(model);
  const Vector x1 = test_support::random_simplex(rng, 3);

  const auto first = cmdp::monte_carlo(model, policy, x1, 5000, 99);
  const auto second = cmdp::monte_carlo(model, policy, x1, 5000, 99);
  CHECK(first.mean == second.mean);
  CHECK(first.std_error == second.std_error);
  const auto other_seed = cmdp::monte_carlo(model, policy, x1, 5000, 100);
  CHECK(other_seed.mean != first.mean);
}

TEST_CASE("monte_carlo agrees with exact propagation within four standard errors") {
  test_support::SplitMix64 rng(73);
  test_support::ModelParams params;
  params.n = 3;
  params.p = 2;
  params.horizon = 4;
  const MdpModel model = test_support::random_model(rng, params);
  const Policy policy = uniform_policy(model);
  const Vector x1 = test_support::random_simplex(rng, 3);

  const double exact = cmdp::expected_reward(model, policy, x1);
  const auto estimate = cmdp::monte_carlo(model, policy, x1, 100000, 12345);
  CHECK(std::abs(estimate.mean - exact) <= 4.0 * estimate.std_error);
}

TEST_CASE("sample_feasible_density honors caps and normalization") {
  test_support::SplitMix64 rng(74);

  const ConstraintSpec vacuous{Vector(4, 1.0)};
  const Vector free_sample = cmdp::sample_feasible_density(vacuous, 5);
  CHECK_THAT(cmdp::sum(free_sample), Catch::Matchers::WithinAbs(1.0, 1e-12));

  const ConstraintSpec forced{{1.0, 0.0, 0.0}};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Vector x = cmdp::sample_feasible_density(forced, seed);
    CHECK_THAT(x[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK(x[1] == 0.0);
    CHECK(x[2] == 0.0);
  }

  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.next() % 5;
    Vector d(n);
    for (double& e : d) e = rng.next_double();
    d[rng.next() % n] = 1.0;  // keep sum(d) >= 1
    const ConstraintSpec caps{d};
    const Vector x = cmdp::sample_feasible_density(caps, rng.next());
    CHECK_THAT(cmdp::sum(x), Catch::Matchers::WithinAbs(1.0, 1e-12));
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(x[i] >= 0.0);
      CHECK(x[i] <= d[i] + 1e-12);
    }
  }
}

TEST_CASE("unconstrained policy on the benchmark blows through the caps") {
  const auto [model, caps] = cmdp::swarm_benchmark(0.1, 20);
  const auto [policy, vf] = cmdp::backward_induction(model);
  Vector x1(9, 0.0);
  x1[5] = 1.0;
  const auto trajectory = cmdp::propagate(model, policy, x1, caps);
  bool top_cell_overflows = false;  // cell 3 (cap 0.5) collects more than half the mass
  bool center_violated = false;     // cell 4 (cap 0.05) lies on the rewarding path
  for (const auto& violation : trajectory.violations) {
    top_cell_overflows = top_cell_overflows || (violation.state == 3 && violation.density > 0.5);
    center_violated = center_violated || violation.state == 4;
  }
  CHECK(top_cell_overflows);
  CHECK(center_violated);
}

TEST_CASE("trajectory CSV carries the documented header and a violation count") {
  MdpModel model;
  model.n = 2;
  model.p = 1;
  model.horizon = 3;
  Matrix g(2, 2);
  g(1, 0) = 1.0;
  g(1, 1) = 1.0;
  model.transitions = {{g}};
  model.rewards = {Matrix(2, 1, 0.0)};
  model.terminal_reward = {0.0, 0.0};

  const ConstraintSpec caps{{1.0, 0.7}};
  const auto trajectory =
      cmdp::propagate(model, uniform_policy(model), {1.0, 0.0}, caps);
  std::ostringstream out;
  cmdp::write_trajectory_csv(out, trajectory);
  const std::string text = out.str();
  CHECK(text.find("t,x1,x2,violation_count") == 0);
  CHECK(text.find("1,0,1,1") != std::string::npos);  // all mass in state 2, above 0.7
}

TEST_CASE("CSV floats round-trip through 17 significant digits") {
  const double value = 0.123456789012345678;
  CHECK(std::stod(cmdp::format_sig17(value)) == value);
  CHECK(cmdp::format_sig17(1.0) == "1");
}

TEST_CASE("reward curve CSV has one row per stage") {
  cmdp::RewardCurves curves;
  curves.unconstrained = {1.0, 2.0};
  curves.constrained = {0.5, 1.0};
  curves.projected = {0.75, 1.5};
  curves.lower_bound = 1.0;
  std::ostringstream out;
  cmdp::write_reward_curve_csv(out, curves);
  const std::string text = out.str();
  CHECK(text.find("t,cum_reward_unconstrained,cum_reward_constrained,cum_reward_projected,"
                  "lower_bound") == 0);
  CHECK(text.find("0,1,0.5,0.75,1\n") != std::string::npos);
  CHECK(text.find("1,2,1,1.5,1\n") != std::string::npos);
}
