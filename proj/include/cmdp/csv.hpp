#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include "cmdp/simulate.hpp"

namespace cmdp {

/// Decimal text with 17 significant digits (round-trips any double).
inline std::string format_sig17(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

/// Header "t,x1,...,xn,violation_count", one row per epoch.
inline void write_trajectory_csv(std::ostream& out, const DensityTrajectory& trajectory) {
  const std::size_t n = trajectory.x.empty() ? 0 : trajectory.x[0].size();
  out << 't';
  for (std::size_t i = 1; i <= n; ++i) out << ",x" << i;
  out << ",violation_count\n";
  for (std::size_t t = 0; t < trajectory.x.size(); ++t) {
    std::size_t count = 0;
    for (const Violation& v : trajectory.violations)
      if (v.t == t) ++count;
    out << t;
    for (std::size_t i = 0; i < n; ++i) out << ',' << format_sig17(trajectory.x[t][i]);
    out << ',' << count << '\n';
  }
}

/// Cumulative expected reward of the three synthesis modes plus the constant
/// certified bound, one row per epoch.
struct RewardCurves {
  Vector unconstrained;
  Vector constrained;
  Vector projected;
  double lower_bound = 0.0;
};

inline void write_reward_curve_csv(std::ostream& out, const RewardCurves& curves) {
  out << "t,cum_reward_unconstrained,cum_reward_constrained,cum_reward_projected,lower_bound\n";
  for (std::size_t t = 0; t < curves.unconstrained.size(); ++t) {
    out << t << ',' << format_sig17(curves.unconstrained[t]) << ','
        << format_sig17(curves.constrained[t]) << ',' << format_sig17(curves.projected[t]) << ','
        << format_sig17(curves.lower_bound) << '\n';
  }
}

}  // namespace cmdp
