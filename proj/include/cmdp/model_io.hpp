#pragma once

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

#include "cmdp/model.hpp"

namespace cmdp {

/// Structurally malformed file contents (wrong shapes, unknown tags); kept
/// distinct from semantic validation failures.
class FormatError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A model file bundles the MDP data with optional density caps.
struct ModelBundle {
  MdpModel model;
  std::optional<ConstraintSpec> caps;
};

/// Synthesis byproducts stored next to a policy.
struct PolicyMetadata {
  std::vector<Vector> u;        // reward-to-go per stage (value function for deterministic policies)
  Vector maximin_objectives;    // per-epoch LP optima; empty for unconstrained synthesis
  std::optional<std::pair<Vector, double>> lower_bound_at;  // {x1, x1'u_0}
};

struct PolicyBundle {
  Policy policy;
  PolicyMetadata metadata;
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols,
                               const std::string& what) {
  if (!j.is_array() || j.size() != rows)
    throw FormatError(what + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& row = j.at(i);
    if (!row.is_array() || row.size() != cols)
      throw FormatError(what + ": row " + std::to_string(i) + " needs " +
                                  std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = row.at(c).get<double>();
  }
  return m;
}

inline Vector vector_from_json(const nlohmann::json& j, std::size_t size, const std::string& what) {
  if (!j.is_array() || j.size() != size)
    throw FormatError(what + ": expected " + std::to_string(size) + " entries");
  Vector v(size);
  for (std::size_t i = 0; i < size; ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace detail

inline nlohmann::json to_json(const ModelBundle& bundle) {
  const MdpModel& model = bundle.model;
  const bool stationary = model.transitions.size() <= 1 && model.rewards.size() <= 1;

  nlohmann::json j;
  j["n"] = model.n;
  j["p"] = model.p;
  j["horizon"] = model.horizon;
  j["stationary"] = stationary;
  j["discount"] = model.discount;

  if (stationary) {
    nlohmann::json stage = nlohmann::json::array();
    if (!model.transitions.empty())
      for (const Matrix& g : model.transitions[0]) stage.push_back(detail::matrix_to_json(g));
    j["transitions"] = std::move(stage);
    j["rewards"] = model.rewards.empty() ? nlohmann::json::array()
                                         : detail::matrix_to_json(model.rewards[0]);
  } else {
    nlohmann::json stages = nlohmann::json::array();
    for (std::size_t t = 0; t < model.num_epochs(); ++t) {
      nlohmann::json stage = nlohmann::json::array();
      for (std::size_t k = 0; k < model.p; ++k)
        stage.push_back(detail::matrix_to_json(model.transition(t, k)));
      stages.push_back(std::move(stage));
    }
    j["transitions"] = std::move(stages);
    nlohmann::json rewards = nlohmann::json::array();
    for (std::size_t t = 0; t < model.num_epochs(); ++t)
      rewards.push_back(detail::matrix_to_json(model.reward(t)));
    j["rewards"] = std::move(rewards);
  }

  j["terminal_reward"] = model.terminal_reward;
  if (!model.action_mask.empty()) {
    nlohmann::json mask = nlohmann::json::array();
    for (std::size_t s = 0; s < model.n; ++s) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t a = 0; a < model.p; ++a)
        row.push_back(static_cast<int>(model.action_mask[s * model.p + a]));
      mask.push_back(std::move(row));
    }
    j["action_mask"] = std::move(mask);
  }
  if (bundle.caps) j["d"] = bundle.caps->d;
  return j;
}

inline ModelBundle model_from_json(const nlohmann::json& j) {
  ModelBundle bundle;
  MdpModel& model = bundle.model;
  model.n = j.at("n").get<std::size_t>();
  model.p = j.at("p").get<std::size_t>();
  model.horizon = j.at("horizon").get<std::size_t>();
  const bool stationary = j.value("stationary", true);
  model.discount = j.value("discount", 1.0);

  const auto& transitions = j.at("transitions");
  if (!transitions.is_array()) throw FormatError("transitions: expected an array");
  if (stationary) {
    if (!transitions.empty()) {
      std::vector<Matrix> stage;
      if (transitions.size() != model.p)
        throw FormatError("transitions: expected one matrix per action");
      for (std::size_t k = 0; k < model.p; ++k)
        stage.push_back(detail::matrix_from_json(transitions.at(k), model.n, model.n,
                                                 "transitions[" + std::to_string(k) + "]"));
      model.transitions.push_back(std::move(stage));
    }
  } else {
    for (std::size_t t = 0; t < transitions.size(); ++t) {
      const auto& stage_json = transitions.at(t);
      if (!stage_json.is_array() || stage_json.size() != model.p)
        throw FormatError("transitions: stage " + std::to_string(t) +
                                    " needs one matrix per action");
      std::vector<Matrix> stage;
      for (std::size_t k = 0; k < model.p; ++k)
        stage.push_back(detail::matrix_from_json(stage_json.at(k), model.n, model.n,
                                                 "transitions[" + std::to_string(t) + "][" +
                                                     std::to_string(k) + "]"));
      model.transitions.push_back(std::move(stage));
    }
  }

  const auto& rewards = j.at("rewards");
  if (stationary) {
    if (!rewards.empty())
      model.rewards.push_back(detail::matrix_from_json(rewards, model.n, model.p, "rewards"));
  } else {
    for (std::size_t t = 0; t < rewards.size(); ++t)
      model.rewards.push_back(detail::matrix_from_json(rewards.at(t), model.n, model.p,
                                                       "rewards[" + std::to_string(t) + "]"));
  }

  model.terminal_reward = detail::vector_from_json(j.at("terminal_reward"), model.n, "terminal_reward");

  if (j.contains("action_mask")) {
    const auto& mask = j.at("action_mask");
    model.action_mask.assign(model.n * model.p, 0);
    if (!mask.is_array() || mask.size() != model.n)
      throw FormatError("action_mask: expected one row per state");
    for (std::size_t s = 0; s < model.n; ++s) {
      const auto& row = mask.at(s);
      if (!row.is_array() || row.size() != model.p)
        throw FormatError("action_mask: row " + std::to_string(s) + " needs one flag per action");
      for (std::size_t a = 0; a < model.p; ++a)
        model.action_mask[s * model.p + a] = row.at(a).get<int>() != 0 ? 1 : 0;
    }
  }

  if (j.contains("d"))
    bundle.caps = ConstraintSpec{detail::vector_from_json(j.at("d"), model.n, "d")};
  return bundle;
}

inline nlohmann::json to_json(const PolicyBundle& bundle) {
  nlohmann::json j;
  nlohmann::json stages = nlohmann::json::array();
  for (const Matrix& q : bundle.policy.stages) stages.push_back(detail::matrix_to_json(q));
  j["stages"] = std::move(stages);
  j["kind"] = bundle.policy.kind == PolicyKind::deterministic ? "deterministic" : "randomized";

  nlohmann::json metadata;
  nlohmann::json u = nlohmann::json::array();
  for (const Vector& v : bundle.metadata.u) u.push_back(v);
  metadata["u"] = std::move(u);
  metadata["maximin_objectives"] = bundle.metadata.maximin_objectives;
  if (bundle.metadata.lower_bound_at) {
    metadata["lower_bound_at"] = {{"x1", bundle.metadata.lower_bound_at->first},
                                  {"value", bundle.metadata.lower_bound_at->second}};
  }
  j["metadata"] = std::move(metadata);
  return j;
}

inline PolicyBundle policy_from_json(const nlohmann::json& j) {
  PolicyBundle bundle;
  const auto& stages = j.at("stages");
  if (!stages.is_array()) throw FormatError("stages: expected an array");
  for (std::size_t t = 0; t < stages.size(); ++t) {
    const auto& stage = stages.at(t);
    if (!stage.is_array() || stage.empty())
      throw FormatError("stages[" + std::to_string(t) + "]: expected a matrix");
    const std::size_t rows = stage.size();
    const std::size_t cols = stage.at(0).is_array() ? stage.at(0).size() : 0;
    bundle.policy.stages.push_back(
        detail::matrix_from_json(stage, rows, cols, "stages[" + std::to_string(t) + "]"));
  }
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "deterministic")
    bundle.policy.kind = PolicyKind::deterministic;
  else if (kind == "randomized")
    bundle.policy.kind = PolicyKind::randomized;
  else
    throw FormatError("kind: expected \"deterministic\" or \"randomized\"");

  if (j.contains("metadata")) {
    const auto& metadata = j.at("metadata");
    if (metadata.contains("u"))
      for (const auto& v : metadata.at("u")) bundle.metadata.u.push_back(v.get<Vector>());
    if (metadata.contains("maximin_objectives"))
      bundle.metadata.maximin_objectives = metadata.at("maximin_objectives").get<Vector>();
    if (metadata.contains("lower_bound_at")) {
      const auto& at = metadata.at("lower_bound_at");
      bundle.metadata.lower_bound_at = {at.at("x1").get<Vector>(), at.at("value").get<double>()};
    }
  }
  return bundle;
}

namespace detail {

inline nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return nlohmann::json::parse(in);
}

inline void write_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace detail

inline ModelBundle load_model(const std::string& path) {
  return model_from_json(detail::parse_file(path));
}

inline void save_model(const std::string& path, const ModelBundle& bundle) {
  detail::write_file(path, to_json(bundle));
}

inline PolicyBundle load_policy(const std::string& path) {
  return policy_from_json(detail::parse_file(path));
}

inline void save_policy(const std::string& path, const PolicyBundle& bundle) {
  detail::write_file(path, to_json(bundle));
}

}  // namespace cmdp
