#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cmdp/constrained.hpp"
#include "cmdp/model.hpp"
#include "cmdp/rng.hpp"

namespace cmdp {

inline constexpr double kViolationTol = 1e-8;  // matches the LP feasibility tolerance

struct Violation {
  std::size_t t = 0;
  std::size_t state = 0;
  double density = 0.0;
  double cap = 0.0;
};

/// Exact density trajectory x_0..x_{N-1} under a policy, with every cap
/// violation x_t(s) > d(s) + 1e-8 recorded.
struct DensityTrajectory {
  std::vector<Vector> x;
  std::vector<Violation> violations;
};

namespace detail {

inline void check_density(const Vector& x1, std::size_t n) {
  if (x1.size() != n) throw std::invalid_argument("start density has wrong length");
  double total = 0.0;
  for (double e : x1) {
    if (e < -kPolicyRowTol || !std::isfinite(e))
      throw std::invalid_argument("start density has a negative entry");
    total += e;
  }
  if (std::abs(total - 1.0) > kPolicyRowTol)
    throw std::invalid_argument("start density is not normalized");
}

}  // namespace detail

/// Propagates x_{t+1} = M_t(Q_t) x_t from x1 and audits the trajectory
/// against the caps when they are given.
inline DensityTrajectory propagate(const MdpModel& model, const Policy& policy, const Vector& x1,
                                   const std::optional<ConstraintSpec>& caps = std::nullopt) {
  validate_policy(model, policy);
  detail::check_density(x1, model.n);
  if (caps && caps->d.size() != model.n)
    throw std::invalid_argument("propagate: caps have wrong length");

  DensityTrajectory trajectory;
  trajectory.x.reserve(model.horizon);
  trajectory.x.push_back(x1);
  for (std::size_t t = 0; t + 1 < model.horizon; ++t) {
    const Matrix m = transition_matrix(model, t, policy.stages[t]);
    trajectory.x.push_back(matvec(m, trajectory.x.back()));
  }
  if (caps) {
    for (std::size_t t = 0; t < trajectory.x.size(); ++t)
      for (std::size_t s = 0; s < model.n; ++s)
        if (trajectory.x[t][s] > caps->d[s] + kViolationTol)
          trajectory.violations.push_back({t, s, trajectory.x[t][s], caps->d[s]});
  }
  return trajectory;
}

/// Exact expected total reward sum_t x_t' r_t(Q_t) + x_{N-1}' r_N.
inline double expected_reward(const MdpModel& model, const Policy& policy, const Vector& x1) {
  const DensityTrajectory trajectory = propagate(model, policy, x1);
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < model.horizon; ++t)
    total += dot(trajectory.x[t], expected_stage_reward(model, t, policy.stages[t]));
  total += dot(trajectory.x.back(), model.terminal_reward);
  return total;
}

/// Per-epoch partial sums of the expected reward (the last entry includes
/// the terminal reward and equals expected_reward).
inline Vector cumulative_reward(const MdpModel& model, const Policy& policy, const Vector& x1) {
  const DensityTrajectory trajectory = propagate(model, policy, x1);
  Vector cumulative(model.horizon, 0.0);
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < model.horizon; ++t) {
    total += dot(trajectory.x[t], expected_stage_reward(model, t, policy.stages[t]));
    cumulative[t] = total;
  }
  cumulative[model.horizon - 1] = total + dot(trajectory.x.back(), model.terminal_reward);
  return cumulative;
}

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

namespace detail {

// Inverse-CDF draw over fixed left-to-right cumulative sums.
inline std::size_t sample_index(double u, const Vector& weights) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    cumulative += weights[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;  // guards against cumulative round-off
}

inline std::size_t sample_column(double u, const Matrix& g, std::size_t column) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const double w = g(i, column);
    if (w <= 0.0) continue;
    cumulative += w;
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;
}

inline std::size_t sample_row(double u, const Matrix& q, std::size_t row) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t a = 0; a < q.cols(); ++a) {
    const double w = q(row, a);
    if (w <= 0.0) continue;
    cumulative += w;
    last_positive = a;
    if (u < cumulative) return a;
  }
  return last_positive;
}

}  // namespace detail

/// Monte Carlo estimate of the expected total reward. Rollout i draws from
/// an independent substream of the seed, so results are reproducible and the
/// estimate does not depend on scheduling; the mean/variance reduction runs
/// in rollout order (Welford).
inline McEstimate monte_carlo(const MdpModel& model, const Policy& policy, const Vector& x1,
                              std::size_t rollouts, std::uint64_t seed) {
  if (rollouts < 1) throw std::invalid_argument("monte_carlo: need at least one rollout");
  validate_policy(model, policy);
  detail::check_density(x1, model.n);

  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < rollouts; ++i) {
    SplitMix64 rng(SplitMix64::substream(seed, i));
    std::size_t state = detail::sample_index(rng.next_double(), x1);
    double total = 0.0;
    for (std::size_t t = 0; t + 1 < model.horizon; ++t) {
      const std::size_t action = detail::sample_row(rng.next_double(), policy.stages[t], state);
      total += model.reward(t)(state, action);
      state = detail::sample_column(rng.next_double(), model.transition(t, action), state);
    }
    total += model.terminal_reward[state];

    const double delta = total - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (total - mean);
  }
  McEstimate estimate;
  estimate.mean = mean;
  if (rollouts > 1) {
    const double variance = m2 / static_cast<double>(rollouts - 1);
    estimate.std_error = std::sqrt(std::max(0.0, variance) / static_cast<double>(rollouts));
  }
  return estimate;
}

/// Uniform-like draw from the safe density set: a uniform simplex proposal
/// whose excess mass over the caps is shifted onto the remaining headroom,
/// proportionally. Terminates because sum(d) >= 1.
inline Vector sample_feasible_density(const ConstraintSpec& caps, std::uint64_t seed) {
  caps.validate();
  const std::size_t n = caps.d.size();
  SplitMix64 rng(seed);

  Vector x(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = -std::log(1.0 - rng.next_double());
    total += x[i];
  }
  for (double& e : x) e /= total;

  while (true) {
    double excess = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (x[i] > caps.d[i]) {
        excess += x[i] - caps.d[i];
        x[i] = caps.d[i];
      }
    if (excess <= 1e-15) break;
    double headroom = 0.0;
    for (std::size_t i = 0; i < n; ++i) headroom += caps.d[i] - x[i];
    for (std::size_t i = 0; i < n; ++i) x[i] += excess * (caps.d[i] - x[i]) / headroom;
  }
  return x;
}

}  // namespace cmdp
