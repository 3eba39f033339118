#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmdp/matrix.hpp"

namespace cmdp {

// Transition matrices are stored COLUMN-stochastic throughout this library:
// G(i, j) = P(next = i | current = j). State densities are column vectors and
// evolve as x' = M x. Most MDP texts use the row-stochastic transpose; every
// tensor read from or written to disk follows the column convention.

inline constexpr double kTransitionColumnTol = 1e-12;  // input data is exact
inline constexpr double kPolicyRowTol = 1e-9;          // policy rows come from LP solves

/// Finite-horizon MDP instance. `horizon` counts reward stages (N); decisions
/// are taken at the N-1 epochs t = 0..N-2.
struct MdpModel {
  std::size_t n = 0;        // states
  std::size_t p = 0;        // actions per state
  std::size_t horizon = 1;  // N

  // transitions[t][k]: n x n column-stochastic matrix for epoch t, action k.
  // Size-1 outer vector = stationary dynamics, reused for every epoch.
  std::vector<std::vector<Matrix>> transitions;
  // rewards[t]: n x p stage rewards; size-1 = stationary.
  std::vector<Matrix> rewards;
  Vector terminal_reward;  // length n

  // Row-major n x p availability flags; empty means every action is available.
  std::vector<std::uint8_t> action_mask;
  double discount = 1.0;  // in (0, 1]

  std::size_t num_epochs() const { return horizon - 1; }
  bool stationary_transitions() const { return transitions.size() == 1; }
  bool stationary_rewards() const { return rewards.size() == 1; }

  const Matrix& transition(std::size_t t, std::size_t k) const {
    return transitions[transitions.size() == 1 ? 0 : t][k];
  }
  const Matrix& reward(std::size_t t) const {
    return rewards[rewards.size() == 1 ? 0 : t];
  }
  bool action_allowed(std::size_t s, std::size_t a) const {
    return action_mask.empty() || action_mask[s * p + a] != 0;
  }
};

/// Per-state density caps. The safe density set is
/// {x : 0 <= x <= d, 1'x = 1}, which is nonempty iff sum(d) >= 1.
struct ConstraintSpec {
  Vector d;

  void validate() const {
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!(d[i] >= 0.0 && d[i] <= 1.0)) {
        std::ostringstream msg;
        msg << "density cap d[" << i << "] = " << d[i] << " outside [0, 1]";
        throw std::invalid_argument(msg.str());
      }
    }
    if (sum(d) < 1.0)
      throw std::invalid_argument("sum of density caps is below 1; the safe density set is empty");
  }
};

enum class PolicyKind { deterministic, randomized };

/// Markovian policy: one row-stochastic n x p matrix per decision epoch,
/// Q_t(s, a) = P(action = a | state = s). Deterministic policies are the
/// special case where every row is a standard basis vector.
struct Policy {
  std::vector<Matrix> stages;
  PolicyKind kind = PolicyKind::randomized;
};

/// Expected reward-to-go vectors produced by constrained synthesis, one per
/// stage (the last entry equals the terminal reward), plus the optimal value
/// of each per-epoch max-min LP.
struct StageValues {
  std::vector<Vector> u;
  Vector maximin_objectives;
};

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
};

namespace detail {

inline bool all_finite(const Vector& v) {
  for (double e : v)
    if (!std::isfinite(e)) return false;
  return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.data()); }

}  // namespace detail

/// Checks every structural invariant of a model and reports each violation
/// with its location. An empty report means the model is valid.
inline ValidationReport validate_model(const MdpModel& model) {
  ValidationReport report;
  auto issue = [&report](const std::string& text) { report.issues.push_back(text); };

  if (model.n < 1) issue("state count n must be at least 1");
  if (model.p < 1) issue("action count p must be at least 1");
  if (model.horizon < 1) issue("horizon must be at least 1");
  if (!(model.discount > 0.0 && model.discount <= 1.0)) issue("discount must lie in (0, 1]");
  if (model.n < 1 || model.p < 1 || model.horizon < 1) return report;

  const std::size_t epochs = model.num_epochs();

  const std::size_t tstages = model.transitions.size();
  if (epochs == 0) {
    if (tstages > 1) issue("transition tensor has stages but the horizon has no decision epoch");
  } else if (tstages != 1 && tstages != epochs) {
    std::ostringstream msg;
    msg << "transition tensor has " << tstages << " stage(s); expected 1 (stationary) or " << epochs;
    issue(msg.str());
  }
  for (std::size_t t = 0; t < tstages; ++t) {
    if (model.transitions[t].size() != model.p) {
      std::ostringstream msg;
      msg << "transition stage " << t << " has " << model.transitions[t].size()
          << " action matrices; expected " << model.p;
      issue(msg.str());
      continue;
    }
    for (std::size_t k = 0; k < model.p; ++k) {
      const Matrix& g = model.transitions[t][k];
      if (g.rows() != model.n || g.cols() != model.n) {
        std::ostringstream msg;
        msg << "transition[t=" << t << "][k=" << k << "] is " << g.rows() << "x" << g.cols()
            << "; expected " << model.n << "x" << model.n;
        issue(msg.str());
        continue;
      }
      for (std::size_t j = 0; j < model.n; ++j) {
        double column_sum = 0.0;
        for (std::size_t i = 0; i < model.n; ++i) {
          const double e = g(i, j);
          column_sum += e;
          if (e < 0.0 || !std::isfinite(e)) {
            std::ostringstream msg;
            msg << "transition[t=" << t << "][k=" << k << "](" << i << "," << j
                << ") = " << e << " is not a probability";
            issue(msg.str());
          }
        }
        if (!(std::abs(column_sum - 1.0) <= kTransitionColumnTol)) {
          std::ostringstream msg;
          msg << "transition[t=" << t << "][k=" << k << "] column " << j << " sums to "
              << column_sum << "; expected 1 within 1e-12";
          issue(msg.str());
        }
      }
    }
  }

  const std::size_t rstages = model.rewards.size();
  if (epochs == 0) {
    if (rstages > 1) issue("reward tensor has stages but the horizon has no decision epoch");
  } else if (rstages != 1 && rstages != epochs) {
    std::ostringstream msg;
    msg << "reward tensor has " << rstages << " stage(s); expected 1 (stationary) or " << epochs;
    issue(msg.str());
  }
  for (std::size_t t = 0; t < rstages; ++t) {
    const Matrix& r = model.rewards[t];
    if (r.rows() != model.n || r.cols() != model.p) {
      std::ostringstream msg;
      msg << "rewards stage " << t << " is " << r.rows() << "x" << r.cols() << "; expected "
          << model.n << "x" << model.p;
      issue(msg.str());
    } else if (!detail::all_finite(r)) {
      std::ostringstream msg;
      msg << "rewards stage " << t << " contains a non-finite entry";
      issue(msg.str());
    }
  }

  if (model.terminal_reward.size() != model.n) {
    std::ostringstream msg;
    msg << "terminal reward has length " << model.terminal_reward.size() << "; expected " << model.n;
    issue(msg.str());
  } else if (!detail::all_finite(model.terminal_reward)) {
    issue("terminal reward contains a non-finite entry");
  }

  if (!model.action_mask.empty()) {
    if (model.action_mask.size() != model.n * model.p) {
      std::ostringstream msg;
      msg << "action mask has " << model.action_mask.size() << " entries; expected "
          << model.n * model.p;
      issue(msg.str());
    } else {
      for (std::size_t s = 0; s < model.n; ++s) {
        bool any = false;
        for (std::size_t a = 0; a < model.p; ++a) any = any || model.action_mask[s * model.p + a];
        if (!any) {
          std::ostringstream msg;
          msg << "state " << s << " has no available action";
          issue(msg.str());
        }
      }
    }
  }
  return report;
}

/// Checks a policy against a model; throws std::invalid_argument on the first
/// violated invariant (shape, row stochasticity, mask, determinism tag).
inline void validate_policy(const MdpModel& model, const Policy& policy) {
  if (policy.stages.size() != model.num_epochs())
    throw std::invalid_argument("policy has " + std::to_string(policy.stages.size()) +
                                " stage(s); model expects " + std::to_string(model.num_epochs()));
  for (std::size_t t = 0; t < policy.stages.size(); ++t) {
    const Matrix& q = policy.stages[t];
    if (q.rows() != model.n || q.cols() != model.p)
      throw std::invalid_argument("policy stage " + std::to_string(t) + " has wrong shape");
    for (std::size_t s = 0; s < model.n; ++s) {
      double row_sum = 0.0;
      std::size_t support = 0;
      for (std::size_t a = 0; a < model.p; ++a) {
        const double e = q(s, a);
        if (e < -kPolicyRowTol || !std::isfinite(e))
          throw std::invalid_argument("policy stage " + std::to_string(t) + " row " +
                                      std::to_string(s) + " has a negative entry");
        if (!model.action_allowed(s, a) && e != 0.0)
          throw std::invalid_argument("policy stage " + std::to_string(t) + " puts mass on masked action (" +
                                      std::to_string(s) + "," + std::to_string(a) + ")");
        row_sum += e;
        if (e > kPolicyRowTol) ++support;
      }
      if (std::abs(row_sum - 1.0) > kPolicyRowTol)
        throw std::invalid_argument("policy stage " + std::to_string(t) + " row " +
                                    std::to_string(s) + " sums to " + std::to_string(row_sum));
      if (policy.kind == PolicyKind::deterministic && support != 1)
        throw std::invalid_argument("deterministic policy stage " + std::to_string(t) + " row " +
                                    std::to_string(s) + " is not a basis vector");
    }
  }
}

/// Folds the discount into the rewards: stage t is scaled by discount^t and
/// the terminal reward by discount^(N-1), after which the returned model has
/// discount 1. Every synthesis and evaluation routine expects this scaled
/// form when the original discount is below 1.
inline MdpModel apply_discount(const MdpModel& model) {
  if (model.discount == 1.0) return model;
  MdpModel scaled = model;
  scaled.discount = 1.0;
  const std::size_t epochs = model.num_epochs();
  scaled.rewards.clear();
  scaled.rewards.reserve(epochs);
  double factor = 1.0;
  for (std::size_t t = 0; t < epochs; ++t) {
    Matrix r = model.reward(t);
    for (double& e : r.data()) e *= factor;
    scaled.rewards.push_back(std::move(r));
    factor *= model.discount;
  }
  // factor is now discount^(N-1)
  for (double& e : scaled.terminal_reward) e *= factor;
  return scaled;
}

}  // namespace cmdp
