#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cmdp/lp.hpp"
#include "cmdp/model.hpp"
#include "cmdp/unconstrained.hpp"

namespace cmdp {

/// Transition matrix induced by a randomized decision rule:
/// M(i, j) = sum_k G_t[k](i, j) * Q(j, k). Column j of M mixes the j-th
/// columns of the action kernels with state j's action distribution, so M is
/// column-stochastic whenever Q is row-stochastic.
inline Matrix transition_matrix(const MdpModel& model, std::size_t t, const Matrix& q) {
  const std::size_t n = model.n, p = model.p;
  if (q.rows() != n || q.cols() != p)
    throw std::invalid_argument("transition_matrix: decision rule has wrong shape");
  Matrix m(n, n);
  for (std::size_t k = 0; k < p; ++k) {
    const Matrix& g = model.transition(t, k);
    for (std::size_t j = 0; j < n; ++j) {
      const double w = q(j, k);
      if (w == 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) m(i, j) += g(i, j) * w;
    }
  }
  return m;
}

/// Expected stage reward under a randomized decision rule:
/// r(s) = sum_a R_t(s, a) * Q(s, a).
inline Vector expected_stage_reward(const MdpModel& model, std::size_t t, const Matrix& q) {
  const std::size_t n = model.n, p = model.p;
  if (q.rows() != n || q.cols() != p)
    throw std::invalid_argument("expected_stage_reward: decision rule has wrong shape");
  const Matrix& r = model.reward(t);
  Vector out(n, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < p; ++a) out[s] += r(s, a) * q(s, a);
  return out;
}

/// Column layout of the per-epoch max-min LP. Variable blocks, in order:
///   Q (n*p, >=0)  decision rule
///   y (n, >=0), z (free)  dual multipliers of the inner minimization
///   r (n, free)   expected stage reward, pinned to Q by equalities
///   M (n^2, free) induced transition matrix, pinned to Q by equalities
///   S (n^2, >=0), s (n, free), K (n^2, >=0)  safety certificate:
///     K = M + S + s 1',  s + d >= K d  certifies that M maps the whole safe
///     density set into the cap region.
struct StageLpLayout {
  std::size_t n = 0, p = 0;
  std::size_t q_begin = 0, y_begin = 0, z_index = 0, r_begin = 0;
  std::size_t m_begin = 0, s_mat_begin = 0, s_vec_begin = 0, k_begin = 0;
  std::size_t width = 0;

  std::size_t q(std::size_t s, std::size_t a) const { return q_begin + s * p + a; }
  std::size_t y(std::size_t i) const { return y_begin + i; }
  std::size_t r(std::size_t i) const { return r_begin + i; }
  std::size_t m(std::size_t i, std::size_t j) const { return m_begin + i * n + j; }
  std::size_t s_mat(std::size_t i, std::size_t j) const { return s_mat_begin + i * n + j; }
  std::size_t s_vec(std::size_t i) const { return s_vec_begin + i; }
  std::size_t k(std::size_t i, std::size_t j) const { return k_begin + i * n + j; }
};

/// Builds the LP whose optimum is
///   max_Q min_x  x' (r_t(Q) + M_t(Q)' u_next)
/// over row-stochastic, mask-respecting Q whose induced transition matrix
/// keeps every density in the safe set below the caps, with x ranging over
/// the safe set. The inner minimum is replaced by its LP dual (-d'y + z).
inline std::pair<LinearProgram, StageLpLayout> build_stage_lp(const MdpModel& model,
                                                              const ConstraintSpec& caps,
                                                              std::size_t t,
                                                              const Vector& u_next) {
  const std::size_t n = model.n, p = model.p;
  if (caps.d.size() != n) throw std::invalid_argument("build_stage_lp: caps have wrong length");
  if (u_next.size() != n) throw std::invalid_argument("build_stage_lp: u_next has wrong length");
  const Vector& d = caps.d;

  StageLpLayout layout;
  layout.n = n;
  layout.p = p;
  layout.q_begin = 0;
  layout.y_begin = layout.q_begin + n * p;
  layout.z_index = layout.y_begin + n;
  layout.r_begin = layout.z_index + 1;
  layout.m_begin = layout.r_begin + n;
  layout.s_mat_begin = layout.m_begin + n * n;
  layout.s_vec_begin = layout.s_mat_begin + n * n;
  layout.k_begin = layout.s_vec_begin + n;
  layout.width = layout.k_begin + n * n;

  std::size_t masked = 0;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < p; ++a)
      if (!model.action_allowed(s, a)) ++masked;

  LinearProgram lp;
  lp.sense = ObjectiveSense::maximize;
  lp.c.assign(layout.width, 0.0);
  for (std::size_t i = 0; i < n; ++i) lp.c[layout.y(i)] = -d[i];
  lp.c[layout.z_index] = 1.0;

  lp.bounds.assign(layout.width, VariableBound{});
  const double inf = std::numeric_limits<double>::infinity();
  lp.bounds[layout.z_index].lower = -inf;
  for (std::size_t i = 0; i < n; ++i) {
    lp.bounds[layout.r(i)].lower = -inf;
    lp.bounds[layout.s_vec(i)].lower = -inf;
  }
  for (std::size_t i = 0; i < n * n; ++i) lp.bounds[layout.m_begin + i].lower = -inf;

  const std::size_t eq_rows = n * n + n + n * n + n + masked;
  lp.a_eq = Matrix(eq_rows, layout.width);
  lp.b_eq.assign(eq_rows, 0.0);
  std::size_t row = 0;

  // M(i,j) - sum_k G_t[k](i,j) Q(j,k) = 0
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j, ++row) {
      lp.a_eq(row, layout.m(i, j)) = 1.0;
      for (std::size_t k = 0; k < p; ++k) lp.a_eq(row, layout.q(j, k)) = -model.transition(t, k)(i, j);
    }
  }
  // r(s) - sum_a R_t(s,a) Q(s,a) = 0
  {
    const Matrix& r = model.reward(t);
    for (std::size_t s = 0; s < n; ++s, ++row) {
      lp.a_eq(row, layout.r(s)) = 1.0;
      for (std::size_t a = 0; a < p; ++a) lp.a_eq(row, layout.q(s, a)) = -r(s, a);
    }
  }
  // K(i,j) - M(i,j) - S(i,j) - s(i) = 0
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j, ++row) {
      lp.a_eq(row, layout.k(i, j)) = 1.0;
      lp.a_eq(row, layout.m(i, j)) = -1.0;
      lp.a_eq(row, layout.s_mat(i, j)) = -1.0;
      lp.a_eq(row, layout.s_vec(i)) = -1.0;
    }
  }
  // sum_a Q(s,a) = 1
  for (std::size_t s = 0; s < n; ++s, ++row) {
    for (std::size_t a = 0; a < p; ++a) lp.a_eq(row, layout.q(s, a)) = 1.0;
    lp.b_eq[row] = 1.0;
  }
  // masked actions pinned to zero
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < p; ++a)
      if (!model.action_allowed(s, a)) lp.a_eq(row++, layout.q(s, a)) = 1.0;

  const std::size_t ub_rows = n + n;
  lp.a_ub = Matrix(ub_rows, layout.width);
  lp.b_ub.assign(ub_rows, 0.0);
  // dual feasibility: -y(i) + z - r(i) - sum_j u_next(j) M(j,i) <= 0
  for (std::size_t i = 0; i < n; ++i) {
    lp.a_ub(i, layout.y(i)) = -1.0;
    lp.a_ub(i, layout.z_index) = 1.0;
    lp.a_ub(i, layout.r(i)) = -1.0;
    for (std::size_t j = 0; j < n; ++j) lp.a_ub(i, layout.m(j, i)) = -u_next[j];
  }
  // safety: sum_j K(i,j) d(j) - s(i) <= d(i)
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t sr = n + i;
    for (std::size_t j = 0; j < n; ++j) lp.a_ub(sr, layout.k(i, j)) = d[j];
    lp.a_ub(sr, layout.s_vec(i)) = -1.0;
    lp.b_ub[sr] = d[i];
  }

  lp.variable_names.reserve(layout.width);
  auto name2 = [&lp](const char* base, std::size_t i, std::size_t j) {
    std::ostringstream os;
    os << base << '[' << i << ',' << j << ']';
    lp.variable_names.push_back(os.str());
  };
  auto name1 = [&lp](const char* base, std::size_t i) {
    std::ostringstream os;
    os << base << '[' << i << ']';
    lp.variable_names.push_back(os.str());
  };
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < p; ++a) name2("Q", s, a);
  for (std::size_t i = 0; i < n; ++i) name1("y", i);
  lp.variable_names.push_back("z");
  for (std::size_t i = 0; i < n; ++i) name1("r", i);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) name2("M", i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) name2("S", i, j);
  for (std::size_t i = 0; i < n; ++i) name1("s", i);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) name2("K", i, j);

  return {std::move(lp), layout};
}

/// Raised when a per-epoch LP has no feasible decision rule, i.e. no policy
/// can keep the density below the caps at that epoch.
class StageInfeasibleError : public std::runtime_error {
 public:
  StageInfeasibleError(std::size_t epoch, double certificate)
      : std::runtime_error(message(epoch, certificate)), epoch_(epoch), certificate_(certificate) {}

  std::size_t epoch() const { return epoch_; }
  double certificate() const { return certificate_; }

 private:
  static std::string message(std::size_t epoch, double certificate) {
    std::ostringstream os;
    os << "stage LP infeasible at epoch " << epoch << " (phase-1 certificate " << certificate
       << "); relax the density caps d";
    return os.str();
  }
  std::size_t epoch_;
  double certificate_;
};

namespace detail {

// Q block of an LP point, with masked entries zeroed, negatives clamped and
// rows renormalized (the LP satisfies these only up to solver tolerance).
inline Matrix extract_stage_policy(const MdpModel& model, const StageLpLayout& layout,
                                   const Vector& x) {
  Matrix q(model.n, model.p);
  for (std::size_t s = 0; s < model.n; ++s) {
    double row_sum = 0.0;
    for (std::size_t a = 0; a < model.p; ++a) {
      double e = model.action_allowed(s, a) ? std::max(0.0, x[layout.q(s, a)]) : 0.0;
      q(s, a) = e;
      row_sum += e;
    }
    for (std::size_t a = 0; a < model.p; ++a) q(s, a) /= row_sum;
  }
  return q;
}

inline void check_synthesis_inputs(const MdpModel& model, const ConstraintSpec& caps) {
  caps.validate();
  if (caps.d.size() != model.n)
    throw std::invalid_argument("density caps and model disagree on the state count");
}

inline Vector reward_to_go(const MdpModel& model, std::size_t t, const Matrix& q,
                           const Vector& u_next) {
  Vector u = expected_stage_reward(model, t, q);
  const Matrix m = transition_matrix(model, t, q);
  for (std::size_t i = 0; i < model.n; ++i)
    for (std::size_t j = 0; j < model.n; ++j) u[i] += m(j, i) * u_next[j];
  return u;
}

}  // namespace detail

/// Constrained backward induction. For t = N-2..0 solves the per-epoch
/// max-min LP, keeps its decision rule and folds it into the reward-to-go:
///   u_t = r_t(Q_t) + M_t(Q_t)' u_{t+1},   u_{N-1} = terminal reward.
/// The synthesized policy keeps every start in the safe set feasible for the
/// whole horizon, and x1' u_0 is a certified lower bound on its expected
/// total reward from any start x1 in the safe set.
inline std::pair<Policy, StageValues> synthesize(const MdpModel& model, const ConstraintSpec& caps,
                                                 const SimplexOptions& options = {}) {
  detail::check_synthesis_inputs(model, caps);
  const std::size_t epochs = model.num_epochs();

  StageValues values;
  values.u.assign(model.horizon, Vector());
  values.u[model.horizon - 1] = model.terminal_reward;
  values.maximin_objectives.assign(epochs, 0.0);

  Policy policy;
  policy.kind = PolicyKind::randomized;
  policy.stages.assign(epochs, Matrix());

  for (std::size_t t = epochs; t-- > 0;) {
    auto [lp, layout] = build_stage_lp(model, caps, t, values.u[t + 1]);
    const LpSolution solution = solve(lp, options);
    if (solution.status == LpStatus::infeasible)
      throw StageInfeasibleError(t, solution.infeasibility);
    if (solution.status != LpStatus::optimal)
      throw std::runtime_error(std::string("stage LP at epoch ") + std::to_string(t) +
                               " ended with status " + to_string(solution.status));
    policy.stages[t] = detail::extract_stage_policy(model, layout, solution.x);
    values.maximin_objectives[t] = solution.objective;
    values.u[t] = detail::reward_to_go(model, t, policy.stages[t], values.u[t + 1]);
  }
  return {std::move(policy), std::move(values)};
}

/// Certified lower bound x1' u_0 for a start density x1 in the safe set.
inline double lower_bound(const StageValues& values, const ConstraintSpec& caps, const Vector& x1) {
  const Vector& d = caps.d;
  if (x1.size() != d.size()) throw std::invalid_argument("lower_bound: x1 has wrong length");
  double total = 0.0;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    if (x1[i] < -kPolicyRowTol || x1[i] > d[i] + kPolicyRowTol)
      throw std::invalid_argument("lower_bound: x1 leaves the safe density set at state " +
                                  std::to_string(i));
    total += x1[i];
  }
  if (std::abs(total - 1.0) > kPolicyRowTol)
    throw std::invalid_argument("lower_bound: x1 is not normalized");
  return dot(x1, values.u.front());
}

/// Among the decision rules that are optimal for the epoch-t max-min LP
/// (within eps = 1e-7 * (1 + |maximin_value|)), returns the one closest to
/// q_target in entrywise L1 distance. The distance is linearized with one
/// auxiliary variable per Q entry, so the projection is itself an LP.
inline Matrix project_stage(const MdpModel& model, const ConstraintSpec& caps, std::size_t t,
                            const Vector& u_next, double maximin_value, const Matrix& q_target,
                            const SimplexOptions& options = {}) {
  const std::size_t n = model.n, p = model.p;
  if (q_target.rows() != n || q_target.cols() != p)
    throw std::invalid_argument("project_stage: q_target has wrong shape");
  auto [lp, layout] = build_stage_lp(model, caps, t, u_next);

  const std::size_t gap_begin = layout.width;
  const std::size_t width = layout.width + n * p;

  lp.sense = ObjectiveSense::minimize;
  lp.c.assign(width, 0.0);
  for (std::size_t i = gap_begin; i < width; ++i) lp.c[i] = 1.0;
  lp.bounds.resize(width);  // gap block keeps the default [0, inf)
  lp.variable_names.resize(width, "gap");

  Matrix a_eq(lp.a_eq.rows(), width);
  for (std::size_t i = 0; i < lp.a_eq.rows(); ++i)
    for (std::size_t j = 0; j < layout.width; ++j) a_eq(i, j) = lp.a_eq(i, j);
  lp.a_eq = std::move(a_eq);

  const std::size_t old_ub = lp.a_ub.rows();
  Matrix a_ub(old_ub + 2 * n * p + 1, width);
  for (std::size_t i = 0; i < old_ub; ++i)
    for (std::size_t j = 0; j < layout.width; ++j) a_ub(i, j) = lp.a_ub(i, j);
  lp.b_ub.resize(old_ub + 2 * n * p + 1, 0.0);

  std::size_t row = old_ub;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < p; ++a) {
      const std::size_t gap = gap_begin + s * p + a;
      // Q - gap <= target  and  -Q - gap <= -target  encode |Q - target| <= gap
      a_ub(row, layout.q(s, a)) = 1.0;
      a_ub(row, gap) = -1.0;
      lp.b_ub[row++] = q_target(s, a);
      a_ub(row, layout.q(s, a)) = -1.0;
      a_ub(row, gap) = -1.0;
      lp.b_ub[row++] = -q_target(s, a);
    }
  }
  // keep the max-min objective: d'y - z <= -(maximin_value - eps)
  const double eps = 1e-7 * (1.0 + std::abs(maximin_value));
  for (std::size_t i = 0; i < n; ++i) a_ub(row, layout.y(i)) = caps.d[i];
  a_ub(row, layout.z_index) = -1.0;
  lp.b_ub[row] = -(maximin_value - eps);
  lp.a_ub = std::move(a_ub);

  const LpSolution solution = solve(lp, options);
  if (solution.status != LpStatus::optimal)
    throw std::runtime_error(std::string("projection LP at epoch ") + std::to_string(t) +
                             " ended with status " + to_string(solution.status) +
                             "; this cannot happen when maximin_value came from a successful solve");
  return detail::extract_stage_policy(model, layout, solution.x);
}

/// Constrained backward induction with the projection heuristic: each epoch
/// first solves the max-min LP for its optimal value, then picks the optimal
/// decision rule closest to the unconstrained optimal policy. Reward-to-go
/// vectors are recomputed from the projected rules, so the reported bound
/// certifies the returned policy. With vacuous caps (d = 1) this recovers
/// the unconstrained optimum exactly.
inline std::pair<Policy, StageValues> synthesize_projected(const MdpModel& model,
                                                           const ConstraintSpec& caps,
                                                           const SimplexOptions& options = {}) {
  detail::check_synthesis_inputs(model, caps);
  const std::size_t epochs = model.num_epochs();
  const auto [target_policy, target_values] = backward_induction(model);

  StageValues values;
  values.u.assign(model.horizon, Vector());
  values.u[model.horizon - 1] = model.terminal_reward;
  values.maximin_objectives.assign(epochs, 0.0);

  Policy policy;
  policy.kind = PolicyKind::randomized;
  policy.stages.assign(epochs, Matrix());

  for (std::size_t t = epochs; t-- > 0;) {
    auto [lp, layout] = build_stage_lp(model, caps, t, values.u[t + 1]);
    const LpSolution solution = solve(lp, options);
    if (solution.status == LpStatus::infeasible)
      throw StageInfeasibleError(t, solution.infeasibility);
    if (solution.status != LpStatus::optimal)
      throw std::runtime_error(std::string("stage LP at epoch ") + std::to_string(t) +
                               " ended with status " + to_string(solution.status));
    policy.stages[t] = project_stage(model, caps, t, values.u[t + 1], solution.objective,
                                     target_policy.stages[t], options);
    values.maximin_objectives[t] = solution.objective;
    values.u[t] = detail::reward_to_go(model, t, policy.stages[t], values.u[t + 1]);
  }
  return {std::move(policy), std::move(values)};
}

}  // namespace cmdp
