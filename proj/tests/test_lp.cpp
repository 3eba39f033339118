#include <catch2/catch_amalgamated.hpp>

#include <limits>
#include <sstream>

#include "cmdp/lp.hpp"
#include "test_support.hpp"

using cmdp::LinearProgram;
using cmdp::LpSolution;
using cmdp::LpStatus;
using cmdp::Matrix;
using cmdp::ObjectiveSense;
using cmdp::StandardForm;
using cmdp::Vector;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double residual(const LinearProgram& lp, const Vector& x) {
  double worst = 0.0;
  for (std::size_t i = 0; i < lp.a_eq.rows(); ++i) {
    double lhs = 0.0;
    for (std::size_t j = 0; j < lp.num_vars(); ++j) lhs += lp.a_eq(i, j) * x[j];
    worst = std::max(worst, std::abs(lhs - lp.b_eq[i]));
  }
  for (std::size_t i = 0; i < lp.a_ub.rows(); ++i) {
    double lhs = 0.0;
    for (std::size_t j = 0; j < lp.num_vars(); ++j) lhs += lp.a_ub(i, j) * x[j];
    worst = std::max(worst, std::max(0.0, lhs - lp.b_ub[i]));
  }
  for (std::size_t j = 0; j < lp.num_vars(); ++j) {
    const cmdp::VariableBound vb = lp.bounds.empty() ? cmdp::VariableBound{} : lp.bounds[j];
    worst = std::max(worst, std::max(0.0, vb.lower - x[j]));
    worst = std::max(worst, std::max(0.0, x[j] - vb.upper));
  }
  return worst;
}

}  // namespace

TEST_CASE("standardize turns an upper-bounded maximization into min form") {
  LinearProgram lp;
  lp.sense = ObjectiveSense::maximize;
  lp.c = {1.0};
  lp.a_ub = Matrix(1, 1);
  lp.a_ub(0, 0) = 1.0;
  lp.b_ub = {3.0};

  const StandardForm sf = standardize(lp);
  REQUIRE(sf.a.rows() == 1);
  REQUIRE(sf.a.cols() == 2);  // x and its slack
  CHECK(sf.c[0] == -1.0);     // maximize negated
  CHECK(sf.c[1] == 0.0);
  CHECK(sf.a(0, 0) == 1.0);
  CHECK(sf.a(0, 1) == 1.0);
  CHECK(sf.b[0] == 3.0);

  const LpSolution sol = solve(lp);
  REQUIRE(sol.status == LpStatus::optimal);
  CHECK_THAT(sol.objective, Catch::Matchers::WithinAbs(3.0, 1e-9));
}

TEST_CASE("standardize splits free variables and the inverse map round-trips") {
  // min z s.t. z >= -5 encoded as -z <= 5, z free
  LinearProgram lp;
  lp.c = {1.0};
  lp.a_ub = Matrix(1, 1);
  lp.a_ub(0, 0) = -1.0;
  lp.b_ub = {5.0};
  lp.bounds = {{-kInf, kInf}};

  const StandardForm sf = standardize(lp);
  REQUIRE(sf.a.cols() == 3);  // z+, z-, slack
  REQUIRE(sf.minus[0] != StandardForm::npos);

  // recover() maps the split parts back: y = (z+, z-, s)
  CHECK(sf.recover({2.0, 7.0, 0.0})[0] == -5.0);

  const LpSolution sol = solve(lp);
  REQUIRE(sol.status == LpStatus::optimal);
  CHECK_THAT(sol.objective, Catch::Matchers::WithinAbs(-5.0, 1e-9));
  CHECK_THAT(sol.x[0], Catch::Matchers::WithinAbs(-5.0, 1e-9));
}

TEST_CASE("standardize keeps mixed eq/ub systems consistent") {
  // max x0 + x1 + x2 s.t. x0 + x1 = 1, x1 + x2 = 1, x0 + x2 <= 1.5
  LinearProgram lp;
  lp.sense = ObjectiveSense::maximize;
  lp.c = {1.0, 1.0, 1.0};
  lp.a_eq = Matrix(2, 3);
  lp.a_eq(0, 0) = 1.0;
  lp.a_eq(0, 1) = 1.0;
  lp.a_eq(1, 1) = 1.0;
  lp.a_eq(1, 2) = 1.0;
  lp.b_eq = {1.0, 1.0};
  lp.a_ub = Matrix(1, 3);
  lp.a_ub(0, 0) = 1.0;
  lp.a_ub(0, 2) = 1.0;
  lp.b_ub = {1.5};

  const StandardForm sf = standardize(lp);
  REQUIRE(sf.a.rows() == 3);
  REQUIRE(sf.a.cols() == 4);  // three variables, one slack

  const LpSolution sol = solve(lp);
  REQUIRE(sol.status == LpStatus::optimal);
  CHECK(residual(lp, sol.x) <= 1e-9);
}

TEST_CASE("finite upper bounds become slack rows") {
  LinearProgram lp;
  lp.sense = ObjectiveSense::maximize;
  lp.c = {1.0, 1.0};
  lp.bounds = {{0.0, 3.0}, {-kInf, 0.5}};

  const StandardForm sf = standardize(lp);
  REQUIRE(sf.a.rows() == 2);      // one row per finite upper bound
  REQUIRE(sf.a.cols() == 5);      // x0, x1+, x1-, two slacks

  const LpSolution sol = solve(lp);
  REQUIRE(sol.status == LpStatus::optimal);
  CHECK_THAT(sol.objective, Catch::Matchers::WithinAbs(3.5, 1e-9));
  CHECK_THAT(sol.x[0], Catch::Matchers::WithinAbs(3.0, 1e-9));
  CHECK_THAT(sol.x[1], Catch::Matchers::WithinAbs(0.5, 1e-9));
}

TEST_CASE("standardize rejects dimension mismatches") {
  LinearProgram lp;
  lp.c = {1.0, 2.0};
  lp.a_eq = Matrix(1, 3);
  lp.b_eq = {1.0};
  CHECK_THROWS_AS(standardize(lp), std::invalid_argument);
}

TEST_CASE("solve: equality-forced objective") {
  LinearProgram lp;
  lp.c = {1.0, 1.0};
  lp.a_eq = Matrix(1, 2);
  lp.a_eq(0, 0) = 1.0;
  lp.a_eq(0, 1) = 1.0;
  lp.b_eq = {1.0};

  const LpSolution sol = solve(lp);
  REQUIRE(sol.status == LpStatus::optimal);
  CHECK_THAT(sol.objective, Catch::Matchers::WithinAbs(1.0, 1e-9));
  CHECK_THAT(sol.x[0] + sol.x[1], Catch::Matchers::WithinAbs(1.0, 1e-9));
}

TEST_CASE("solve: infeasible box") {
  // x >= 0 and x <= -1
  LinearProgram lp;
  lp.c = {1.0};
  lp.a_ub = Matrix(1, 1);
  lp.a_ub(0, 0) = 1.0;
  lp.b_ub = {-1.0};

  const LpSolution sol = solve(lp);
  CHECK(sol.status == LpStatus::infeasible);
  CHECK(sol.infeasibility > 1e-8);  // phase-1 certificate
}

TEST_CASE("solve: unbounded ray") {
  LinearProgram lp;
  lp.sense = ObjectiveSense::maximize;
  lp.c = {1.0};
  const LpSolution sol = solve(lp);
  CHECK(sol.status == LpStatus::unbounded);
}

TEST_CASE("solve: iteration cap reports stalled") {
  LinearProgram lp;
  lp.sense = ObjectiveSense::maximize;
  lp.c = {1.0, 2.0, 3.0};
  lp.a_ub = Matrix(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j <= i; ++j) lp.a_ub(i, j) = 1.0;
  lp.b_ub = {1.0, 2.0, 3.0};

  cmdp::SimplexOptions options;
  options.max_iterations = 1;
  CHECK(solve(lp, options).status == LpStatus::stalled);
  CHECK(solve(lp).status == LpStatus::optimal);
}

TEST_CASE("solve: dual form of the inner minimization matches vertex enumeration") {
  // For fixed u, max -d'y + z s.t. -y + z 1 <= u, y >= 0 equals
  // min { x'u : 0 <= x <= d, 1'x = 1 }, evaluated at the segment vertices.
  test_support::SplitMix64 rng(41);
  for (int trial = 0; trial < 25; ++trial) {
    const Vector u = {test_support::uniform(rng, -2, 2), test_support::uniform(rng, -2, 2)};
    Vector d = {test_support::uniform(rng, 0.3, 1.0), test_support::uniform(rng, 0.3, 1.0)};
    if (d[0] + d[1] < 1.0) d[0] = 1.0;

    LinearProgram lp;
    lp.sense = ObjectiveSense::maximize;
    lp.c = {-d[0], -d[1], 1.0};
    lp.bounds = {{0, kInf}, {0, kInf}, {-kInf, kInf}};
    lp.a_ub = Matrix(2, 3);
    lp.a_ub(0, 0) = -1.0;
    lp.a_ub(0, 2) = 1.0;
    lp.a_ub(1, 1) = -1.0;
    lp.a_ub(1, 2) = 1.0;
    lp.b_ub = {u[0], u[1]};

    const LpSolution sol = solve(lp);
    REQUIRE(sol.status == LpStatus::optimal);

    double vertex_min = std::numeric_limits<double>::infinity();
    for (const Vector& v : test_support::safe_set_vertices_2d(cmdp::ConstraintSpec{d}))
      vertex_min = std::min(vertex_min, cmdp::dot(v, u));
    CHECK_THAT(sol.objective, Catch::Matchers::WithinAbs(vertex_min, 1e-9));
  }
}

TEST_CASE("solve is deterministic bit for bit") {
  test_support::SplitMix64 rng(7);
  LinearProgram lp;
  lp.sense = ObjectiveSense::maximize;
  lp.c.resize(6);
  for (double& e : lp.c) e = test_support::uniform(rng, -1, 1);
  lp.a_ub = Matrix(4, 6);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) lp.a_ub(i, j) = test_support::uniform(rng, 0, 1);
  lp.b_ub = {1.0, 2.0, 1.5, 0.5};

  const LpSolution first = solve(lp);
  const LpSolution second = solve(lp);
  REQUIRE(first.status == LpStatus::optimal);
  REQUIRE(second.status == first.status);
  CHECK(second.objective == first.objective);
  CHECK(second.x == first.x);
  CHECK(second.iterations == first.iterations);
}

TEST_CASE("solve: optimal points satisfy the solution contract") {
  test_support::SplitMix64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    LinearProgram lp;
    lp.sense = trial % 2 == 0 ? ObjectiveSense::maximize : ObjectiveSense::minimize;
    const std::size_t nv = 3 + static_cast<std::size_t>(rng.next() % 4);
    lp.c.resize(nv);
    for (double& e : lp.c) e = test_support::uniform(rng, -1, 1);
    lp.a_eq = Matrix(1, nv);
    for (std::size_t j = 0; j < nv; ++j) lp.a_eq(0, j) = 1.0;
    lp.b_eq = {1.0};
    lp.a_ub = Matrix(2, nv);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < nv; ++j) lp.a_ub(i, j) = test_support::uniform(rng, -0.5, 1);
    lp.b_ub = {0.8, 0.9};

    const LpSolution sol = solve(lp);
    if (sol.status != LpStatus::optimal) continue;
    CHECK(residual(lp, sol.x) <= 1e-7);
    CHECK(std::abs(sol.objective - cmdp::dot(lp.c, sol.x)) <=
          1e-7 * (1.0 + std::abs(cmdp::dot(lp.c, sol.x))));
    CHECK(sol.infeasibility <= 1e-8);  // phase-1 optimum vanishes on solvable instances
  }
}

TEST_CASE("trace flag dumps the tableau trajectory") {
  LinearProgram lp;
  lp.sense = ObjectiveSense::maximize;
  lp.c = {1.0};
  lp.a_ub = Matrix(1, 1);
  lp.a_ub(0, 0) = 1.0;
  lp.b_ub = {2.0};

  std::ostringstream trace;
  cmdp::SimplexOptions options;
  options.trace = &trace;
  REQUIRE(solve(lp, options).status == LpStatus::optimal);
  CHECK(trace.str().find("pivot") != std::string::npos);
}
