#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cmdp/matrix.hpp"
#include "cmdp/model.hpp"

namespace cmdp {

/// Optimal values of the unconstrained problem: v[t][s] is the best expected
/// reward-to-go from state s at epoch t, argmax_actions[t][s] the action that
/// attains it (lowest index on ties).
struct ValueFunction {
  std::vector<Vector> v;
  std::vector<std::vector<std::size_t>> argmax_actions;
};

class InstanceTooLargeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Exact optimal deterministic Markov policy by backward induction:
///   v_t(s) = max_a { r_t(s, a) + sum_j P(j | s, a) v_{t+1}(j) }
/// over the actions available in s. Ties go to the lowest action index.
inline std::pair<Policy, ValueFunction> backward_induction(const MdpModel& model) {
  const std::size_t n = model.n, p = model.p, horizon = model.horizon;
  ValueFunction vf;
  vf.v.assign(horizon, Vector(n, 0.0));
  vf.v[horizon - 1] = model.terminal_reward;
  vf.argmax_actions.assign(horizon - 1, std::vector<std::size_t>(n, 0));

  Policy policy;
  policy.kind = PolicyKind::deterministic;
  policy.stages.assign(horizon - 1, Matrix(n, p));

  for (std::size_t t = horizon - 1; t-- > 0;) {
    const Matrix& r = model.reward(t);
    const Vector& next = vf.v[t + 1];
    for (std::size_t s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_a = 0;
      for (std::size_t a = 0; a < p; ++a) {
        if (!model.action_allowed(s, a)) continue;
        const Matrix& g = model.transition(t, a);
        double value = r(s, a);
        for (std::size_t j = 0; j < n; ++j) value += g(j, s) * next[j];
        if (value > best) {
          best = value;
          best_a = a;
        }
      }
      vf.v[t][s] = best;
      vf.argmax_actions[t][s] = best_a;
      policy.stages[t](s, best_a) = 1.0;
    }
  }
  return {std::move(policy), std::move(vf)};
}

namespace detail {

// Decision rules (state -> available action) for one epoch, in lexicographic
// order; doubles as the deterministic tie-break order of the enumeration.
inline std::vector<std::vector<std::size_t>> enumerate_rules(const MdpModel& model) {
  std::vector<std::vector<std::size_t>> allowed(model.n);
  for (std::size_t s = 0; s < model.n; ++s)
    for (std::size_t a = 0; a < model.p; ++a)
      if (model.action_allowed(s, a)) allowed[s].push_back(a);

  std::vector<std::vector<std::size_t>> rules;
  std::vector<std::size_t> choice(model.n, 0);
  while (true) {
    std::vector<std::size_t> rule(model.n);
    for (std::size_t s = 0; s < model.n; ++s) rule[s] = allowed[s][choice[s]];
    rules.push_back(std::move(rule));
    std::size_t s = model.n;
    while (s-- > 0) {
      if (++choice[s] < allowed[s].size()) break;
      choice[s] = 0;
      if (s == 0) return rules;
    }
  }
}

}  // namespace detail

/// Test oracle: enumerates every deterministic Markov policy, evaluates each
/// one by exact density propagation from x1 and returns the best. Guarded by
/// p^(n(N-1)) <= 1e6; throws InstanceTooLargeError beyond that.
inline std::pair<Policy, double> brute_force_optimal(const MdpModel& model, const Vector& x1) {
  const std::size_t n = model.n, p = model.p;
  const std::size_t epochs = model.num_epochs();
  if (x1.size() != n) throw std::invalid_argument("brute_force_optimal: x1 has wrong length");
  const double log_count = static_cast<double>(n) * static_cast<double>(epochs) *
                           std::log(static_cast<double>(p));
  if (log_count > std::log(1e6) + 1e-9)
    throw InstanceTooLargeError("brute_force_optimal: more than 1e6 deterministic policies");

  const auto rules = detail::enumerate_rules(model);
  const std::size_t num_rules = rules.size();

  // value of a trajectory under rule choices per epoch
  auto evaluate = [&](const std::vector<std::size_t>& pick) {
    Vector x = x1;
    double total = 0.0;
    for (std::size_t t = 0; t < epochs; ++t) {
      const auto& rule = rules[pick[t]];
      const Matrix& r = model.reward(t);
      Vector next(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        total += x[j] * r(j, rule[j]);
        const Matrix& g = model.transition(t, rule[j]);
        for (std::size_t i = 0; i < n; ++i) next[i] += g(i, j) * x[j];
      }
      x = std::move(next);
    }
    total += dot(x, model.terminal_reward);
    return total;
  };

  std::vector<std::size_t> pick(epochs, 0);
  std::vector<std::size_t> best_pick = pick;
  double best = evaluate(pick);
  while (epochs > 0) {
    std::size_t t = epochs;
    bool advanced = false;
    while (t-- > 0) {
      if (++pick[t] < num_rules) {
        advanced = true;
        break;
      }
      pick[t] = 0;
    }
    if (!advanced) break;
    const double value = evaluate(pick);
    if (value > best) {
      best = value;
      best_pick = pick;
    }
  }

  Policy policy;
  policy.kind = PolicyKind::deterministic;
  policy.stages.assign(epochs, Matrix(n, p));
  for (std::size_t t = 0; t < epochs; ++t)
    for (std::size_t s = 0; s < n; ++s) policy.stages[t](s, rules[best_pick[t]][s]) = 1.0;
  return {std::move(policy), best};
}

}  // namespace cmdp
