#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmdp/matrix.hpp"

namespace cmdp {

enum class ObjectiveSense { minimize, maximize };
enum class LpStatus { optimal, infeasible, unbounded, stalled };

inline const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::stalled: return "stalled";
  }
  return "unknown";
}

/// Per-variable box. Lower bounds are restricted to 0 or -infinity; upper
/// bounds are finite or +infinity.
struct VariableBound {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
};

/// Dense LP container:
///   optimize c'x  subject to  a_eq x = b_eq,  a_ub x <= b_ub,  bounds.
/// An empty `bounds` vector means every variable lives in [0, inf).
struct LinearProgram {
  ObjectiveSense sense = ObjectiveSense::minimize;
  Vector c;
  Matrix a_eq;
  Vector b_eq;
  Matrix a_ub;
  Vector b_ub;
  std::vector<VariableBound> bounds;
  std::vector<std::string> variable_names;  // optional, diagnostics only

  std::size_t num_vars() const { return c.size(); }
};

struct LpSolution {
  LpStatus status = LpStatus::stalled;
  Vector x;                  // present iff optimal, in the original variable space
  double objective = 0.0;    // c'x in the original sense, present iff optimal
  double infeasibility = 0.0;  // phase-1 optimum; positive iff infeasible
  std::size_t iterations = 0;
};

struct SimplexOptions {
  double pivot_tol = 1e-9;
  double feasibility_tol = 1e-8;
  std::size_t max_iterations = 0;  // 0 = 50 * (rows + columns) of the standard form
  std::ostream* trace = nullptr;   // dumps the tableau after every pivot
};

/// Equivalent min-form problem with equality rows and nonnegative variables.
/// Free variables are split into positive and negative parts and every <=
/// row (including finite upper bounds) receives a slack column; `recover`
/// maps a standard-form point back onto the original variables.
struct StandardForm {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  Matrix a;
  Vector b;
  Vector c;
  std::vector<std::size_t> plus;   // column of the positive part of each original variable
  std::vector<std::size_t> minus;  // column of the negative part, npos when not split

  Vector recover(const Vector& y) const {
    Vector x(plus.size(), 0.0);
    for (std::size_t i = 0; i < plus.size(); ++i) {
      x[i] = y[plus[i]];
      if (minus[i] != npos) x[i] -= y[minus[i]];
    }
    return x;
  }
};

inline StandardForm standardize(const LinearProgram& lp) {
  const std::size_t nvars = lp.num_vars();
  const std::size_t eq_rows = lp.a_eq.rows();
  const std::size_t ub_rows = lp.a_ub.rows();
  const double inf = std::numeric_limits<double>::infinity();

  if (eq_rows > 0 && lp.a_eq.cols() != nvars)
    throw std::invalid_argument("standardize: a_eq column count does not match c");
  if (ub_rows > 0 && lp.a_ub.cols() != nvars)
    throw std::invalid_argument("standardize: a_ub column count does not match c");
  if (lp.b_eq.size() != eq_rows || lp.b_ub.size() != ub_rows)
    throw std::invalid_argument("standardize: right-hand side length does not match its matrix");
  if (!lp.bounds.empty() && lp.bounds.size() != nvars)
    throw std::invalid_argument("standardize: bounds length does not match c");
  for (double v : lp.b_eq)
    if (!std::isfinite(v)) throw std::invalid_argument("standardize: b_eq must be finite");
  for (double v : lp.b_ub)
    if (!std::isfinite(v)) throw std::invalid_argument("standardize: b_ub must be finite");

  StandardForm sf;
  sf.plus.assign(nvars, StandardForm::npos);
  sf.minus.assign(nvars, StandardForm::npos);

  std::size_t cols = 0;
  std::size_t bound_rows = 0;
  for (std::size_t i = 0; i < nvars; ++i) {
    const VariableBound vb = lp.bounds.empty() ? VariableBound{} : lp.bounds[i];
    if (!(vb.lower == 0.0 || vb.lower == -inf))
      throw std::invalid_argument("standardize: lower bounds must be 0 or -infinity");
    if (std::isnan(vb.upper) || vb.upper == -inf)
      throw std::invalid_argument("standardize: upper bounds must be finite or +infinity");
    sf.plus[i] = cols++;
    if (vb.lower == -inf) sf.minus[i] = cols++;
    if (vb.upper < inf) ++bound_rows;
  }
  const std::size_t total_le = ub_rows + bound_rows;  // each gets a slack
  const std::size_t rows = eq_rows + total_le;
  sf.a = Matrix(rows, cols + total_le);
  sf.b.assign(rows, 0.0);
  sf.c.assign(cols + total_le, 0.0);

  const double sign = lp.sense == ObjectiveSense::maximize ? -1.0 : 1.0;
  for (std::size_t i = 0; i < nvars; ++i) {
    sf.c[sf.plus[i]] = sign * lp.c[i];
    if (sf.minus[i] != StandardForm::npos) sf.c[sf.minus[i]] = -sign * lp.c[i];
  }

  auto put = [&sf](std::size_t row, std::size_t var, double coeff) {
    sf.a(row, sf.plus[var]) += coeff;
    if (sf.minus[var] != StandardForm::npos) sf.a(row, sf.minus[var]) -= coeff;
  };

  std::size_t row = 0;
  for (std::size_t r = 0; r < eq_rows; ++r, ++row) {
    for (std::size_t j = 0; j < nvars; ++j)
      if (lp.a_eq(r, j) != 0.0) put(row, j, lp.a_eq(r, j));
    sf.b[row] = lp.b_eq[r];
  }
  std::size_t slack = cols;
  for (std::size_t r = 0; r < ub_rows; ++r, ++row) {
    for (std::size_t j = 0; j < nvars; ++j)
      if (lp.a_ub(r, j) != 0.0) put(row, j, lp.a_ub(r, j));
    sf.a(row, slack++) = 1.0;
    sf.b[row] = lp.b_ub[r];
  }
  for (std::size_t i = 0; i < nvars; ++i) {
    const VariableBound vb = lp.bounds.empty() ? VariableBound{} : lp.bounds[i];
    if (vb.upper < inf) {
      put(row, i, 1.0);
      sf.a(row, slack++) = 1.0;
      sf.b[row] = vb.upper;
      ++row;
    }
  }
  return sf;
}

namespace detail {

struct SimplexOutcome {
  LpStatus status = LpStatus::stalled;
  Vector y;
  double phase1 = 0.0;
  std::size_t iterations = 0;
};

class SimplexTableau {
 public:
  SimplexTableau(const StandardForm& sf, const SimplexOptions& opt) : opt_(opt) {
    const std::size_t n = sf.a.cols();
    // Keep nonempty rows only, with b normalized to be nonnegative.
    for (std::size_t i = 0; i < sf.a.rows(); ++i) {
      double max_abs = 0.0;
      for (std::size_t j = 0; j < n; ++j) max_abs = std::max(max_abs, std::abs(sf.a(i, j)));
      if (max_abs <= 1e-14) {
        empty_row_residual_ = std::max(empty_row_residual_, std::abs(sf.b[i]));
        continue;
      }
      const double flip = sf.b[i] < 0.0 ? -1.0 : 1.0;
      Vector row(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) row[j] = flip * sf.a(i, j);
      rows_.push_back(std::move(row));
      rhs_.push_back(flip * sf.b[i]);
    }
    n_ = n;
    m_ = rows_.size();
    cols_ = n_ + m_;  // one artificial per kept row
    for (std::size_t i = 0; i < m_; ++i) {
      rows_[i].resize(cols_, 0.0);
      rows_[i][n_ + i] = 1.0;
    }
    basis_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) basis_[i] = n_ + i;

    cost_.assign(cols_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) cost_[j] = sf.c[j];
    cost_rhs_ = 0.0;
    phase1_cost_.assign(cols_, 0.0);
    phase1_rhs_ = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) phase1_cost_[j] -= rows_[i][j];
      phase1_rhs_ -= rhs_[i];
    }
    banned_.assign(cols_, false);
    max_iterations_ = opt.max_iterations ? opt.max_iterations : 50 * (m_ + cols_);
  }

  SimplexOutcome run() {
    SimplexOutcome out;
    if (empty_row_residual_ > opt_.feasibility_tol) {
      out.status = LpStatus::infeasible;
      out.phase1 = empty_row_residual_;
      return out;
    }

    // Phase 1: drive the artificial variables to zero.
    while (true) {
      if (iterations_ >= max_iterations_) return stalled(out);
      const std::size_t enter = entering(phase1_cost_);
      if (enter == npos) break;
      const std::size_t leave = ratio_test(enter);
      if (leave == npos) return stalled(out);  // phase-1 objective is bounded below
      pivot(leave, enter, 1);
    }
    out.phase1 = std::max(0.0, -phase1_rhs_);
    if (out.phase1 > opt_.feasibility_tol) {
      out.status = LpStatus::infeasible;
      out.iterations = iterations_;
      return out;
    }
    purge_artificials();

    // Phase 2: optimize the real objective over original columns.
    while (true) {
      if (iterations_ >= max_iterations_) return stalled(out);
      const std::size_t enter = entering(cost_, n_);
      if (enter == npos) break;
      const std::size_t leave = ratio_test(enter);
      if (leave == npos) {
        out.status = LpStatus::unbounded;
        out.iterations = iterations_;
        return out;
      }
      pivot(leave, enter, 2);
    }

    out.status = LpStatus::optimal;
    out.iterations = iterations_;
    out.y.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] < n_) out.y[basis_[i]] = std::max(0.0, rhs_[i]);
    return out;
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  SimplexOutcome stalled(SimplexOutcome out) const {
    out.status = LpStatus::stalled;
    out.iterations = iterations_;
    return out;
  }

  // Bland's rule: the eligible column with the lowest index enters.
  std::size_t entering(const Vector& reduced, std::size_t limit = npos) const {
    const std::size_t end = limit == npos ? cols_ : limit;
    for (std::size_t j = 0; j < end; ++j)
      if (!banned_[j] && reduced[j] < -opt_.pivot_tol) return j;
    return npos;
  }

  // Minimum-ratio row; ties broken by the lowest basic variable index.
  std::size_t ratio_test(std::size_t enter) const {
    std::size_t best = npos;
    double best_ratio = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double a = rows_[i][enter];
      if (a <= opt_.pivot_tol) continue;
      const double ratio = rhs_[i] / a;
      if (best == npos || ratio < best_ratio ||
          (ratio == best_ratio && basis_[i] < basis_[best])) {
        best = i;
        best_ratio = ratio;
      }
    }
    return best;
  }

  void pivot(std::size_t r, std::size_t s, int phase) {
    const double inv = 1.0 / rows_[r][s];
    for (double& v : rows_[r]) v *= inv;
    rhs_[r] *= inv;
    rows_[r][s] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      eliminate(rows_[i], rhs_[i], r, s);
    }
    eliminate(cost_, cost_rhs_, r, s);
    eliminate(phase1_cost_, phase1_rhs_, r, s);
    if (basis_[r] >= n_) banned_[basis_[r]] = true;  // artificials never re-enter
    basis_[r] = s;
    ++iterations_;
    if (opt_.trace) dump(*opt_.trace, phase, r, s);
  }

  void eliminate(Vector& row, double& rhs, std::size_t r, std::size_t s) {
    const double factor = row[s];
    if (factor == 0.0) return;
    const Vector& prow = rows_[r];
    for (std::size_t j = 0; j < cols_; ++j) row[j] -= factor * prow[j];
    row[s] = 0.0;
    rhs -= factor * rhs_[r];
  }

  // After phase 1, pivot every remaining basic artificial out of the basis;
  // rows with no eligible column are redundant and dropped.
  void purge_artificials() {
    std::vector<std::size_t> dead;
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < n_) continue;
      std::size_t enter = npos;
      for (std::size_t j = 0; j < n_ && enter == npos; ++j)
        if (rows_[i][j] > opt_.pivot_tol) enter = j;
      for (std::size_t j = 0; j < n_ && enter == npos; ++j)
        if (std::abs(rows_[i][j]) > opt_.pivot_tol) enter = j;
      if (enter != npos)
        pivot(i, enter, 1);
      else
        dead.push_back(i);
    }
    for (std::size_t k = dead.size(); k-- > 0;) {
      const std::size_t i = dead[k];
      rows_.erase(rows_.begin() + static_cast<std::ptrdiff_t>(i));
      rhs_.erase(rhs_.begin() + static_cast<std::ptrdiff_t>(i));
      basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(i));
    }
    m_ = rows_.size();
  }

  void dump(std::ostream& os, int phase, std::size_t r, std::size_t s) const {
    os << "pivot " << iterations_ << " phase " << phase << ": enter x" << s << ", leave row " << r
       << ", objective " << -cost_rhs_ << ", phase-1 " << -phase1_rhs_ << '\n';
    for (std::size_t i = 0; i < m_; ++i) {
      os << "  x" << basis_[i] << " |";
      for (std::size_t j = 0; j < cols_; ++j) os << ' ' << rows_[i][j];
      os << " | " << rhs_[i] << '\n';
    }
  }

  SimplexOptions opt_;
  std::vector<Vector> rows_;
  Vector rhs_;
  Vector cost_;
  double cost_rhs_ = 0.0;
  Vector phase1_cost_;
  double phase1_rhs_ = 0.0;
  std::vector<std::size_t> basis_;
  std::vector<bool> banned_;
  std::size_t n_ = 0, m_ = 0, cols_ = 0;
  std::size_t iterations_ = 0;
  std::size_t max_iterations_ = 0;
  double empty_row_residual_ = 0.0;
};

}  // namespace detail

/// Two-phase primal simplex with Bland's anti-cycling rule on a dense
/// tableau. Deterministic: identical inputs produce identical outputs.
inline LpSolution solve(const LinearProgram& lp, const SimplexOptions& options = {}) {
  const StandardForm sf = standardize(lp);
  detail::SimplexTableau tableau(sf, options);
  const detail::SimplexOutcome out = tableau.run();

  LpSolution solution;
  solution.status = out.status;
  solution.iterations = out.iterations;
  solution.infeasibility = out.phase1;
  if (out.status == LpStatus::optimal) {
    solution.x = sf.recover(out.y);
    solution.objective = dot(lp.c, solution.x);
  }
  return solution;
}

}  // namespace cmdp
