#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cmdp/model.hpp"

namespace cmdp {

/// Grid navigation instance. States are cells in row-major order from the
/// top-left; the five actions are up, down, left, right, stay (in that
/// order). Stage rewards depend on the cell only, never on the action.
struct GridSpec {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double epsilon = 0.1;  // action noise in [0, 1)
  Vector stage_rewards;
  Vector terminal_rewards;
  Vector d;
  std::size_t horizon = 20;
};

enum class GridAction : std::size_t { up = 0, down = 1, left = 2, right = 3, stay = 4 };
inline constexpr std::size_t kGridActions = 5;

/// Builds the grid CMDP. Actions that would leave the grid are masked. An
/// available action reaches its intended cell with probability 1 - epsilon;
/// the remaining epsilon is split equally among the other cells reachable by
/// available actions (the current cell included via "stay").
inline std::pair<MdpModel, ConstraintSpec> build_grid(const GridSpec& spec) {
  const std::size_t n = spec.rows * spec.cols;
  if (spec.rows < 1 || spec.cols < 1) throw std::invalid_argument("grid needs rows, cols >= 1");
  if (!(spec.epsilon >= 0.0 && spec.epsilon < 1.0))
    throw std::invalid_argument("grid noise must lie in [0, 1)");
  if (spec.stage_rewards.size() != n || spec.terminal_rewards.size() != n || spec.d.size() != n)
    throw std::invalid_argument("grid reward/cap vectors must have rows*cols entries");
  if (spec.horizon < 1) throw std::invalid_argument("grid horizon must be at least 1");

  // target cell of an action, or npos when it leaves the grid
  const std::size_t npos = static_cast<std::size_t>(-1);
  auto target = [&spec](std::size_t cell, std::size_t action) -> std::size_t {
    const std::size_t row = cell / spec.cols;
    const std::size_t col = cell % spec.cols;
    switch (static_cast<GridAction>(action)) {
      case GridAction::up: return row == 0 ? npos : cell - spec.cols;
      case GridAction::down: return row + 1 == spec.rows ? npos : cell + spec.cols;
      case GridAction::left: return col == 0 ? npos : cell - 1;
      case GridAction::right: return col + 1 == spec.cols ? npos : cell + 1;
      case GridAction::stay: return cell;
    }
    return npos;
  };

  MdpModel model;
  model.n = n;
  model.p = kGridActions;
  model.horizon = spec.horizon;
  model.action_mask.assign(n * kGridActions, 0);

  std::vector<std::vector<std::size_t>> reachable(n);
  for (std::size_t cell = 0; cell < n; ++cell) {
    for (std::size_t a = 0; a < kGridActions; ++a) {
      const std::size_t to = target(cell, a);
      if (to == npos) continue;
      model.action_mask[cell * kGridActions + a] = 1;
      reachable[cell].push_back(to);
    }
  }

  model.transitions.assign(1, std::vector<Matrix>(kGridActions, Matrix(n, n)));
  for (std::size_t a = 0; a < kGridActions; ++a) {
    Matrix& g = model.transitions[0][a];
    for (std::size_t cell = 0; cell < n; ++cell) {
      const std::size_t to = target(cell, a);
      if (to == npos) {
        g(cell, cell) = 1.0;  // masked action, filler column
        continue;
      }
      const std::size_t others = reachable[cell].size() - 1;
      if (others == 0) {
        g(to, cell) = 1.0;
        continue;
      }
      g(to, cell) += 1.0 - spec.epsilon;
      for (const std::size_t alt : reachable[cell])
        if (alt != to) g(alt, cell) += spec.epsilon / static_cast<double>(others);
    }
  }

  model.rewards.assign(1, Matrix(n, kGridActions));
  for (std::size_t cell = 0; cell < n; ++cell)
    for (std::size_t a = 0; a < kGridActions; ++a) model.rewards[0](cell, a) = spec.stage_rewards[cell];
  model.terminal_reward = spec.terminal_rewards;

  return {std::move(model), ConstraintSpec{spec.d}};
}

/// The bundled 3x3 swarm coordination benchmark: one high-reward cell (10),
/// a rewarding but tightly capped center lane, and a free column to start
/// from. Bins are numbered row-major from the top-left; the start used in
/// the documentation is cell index 5, the only cell with cap 1.
inline std::pair<MdpModel, ConstraintSpec> swarm_benchmark(double epsilon = 0.1,
                                                           std::size_t horizon = 20) {
  GridSpec spec;
  spec.rows = 3;
  spec.cols = 3;
  spec.epsilon = epsilon;
  spec.horizon = horizon;
  spec.stage_rewards = {1, 1, 1, 10, 5, 0, 3, 3, 3};
  spec.terminal_rewards = {0, 0, 0, 10, 0, 0, 0, 0, 0};
  spec.d = {0.4, 0.4, 0.4, 0.5, 0.05, 1.0, 0.2, 0.2, 0.2};
  return build_grid(spec);
}

}  // namespace cmdp
