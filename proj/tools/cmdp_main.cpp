// Command-line front end: model validation, policy synthesis, simulation and
// grid-instance generation wired into reproducible pipelines.
//
// Exit codes: 0 ok, 1 invalid model, 2 parse/argument failure,
//             3 synthesis infeasible, 4 model/policy/start incompatibility.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmdp/constrained.hpp"
#include "cmdp/csv.hpp"
#include "cmdp/gridworld.hpp"
#include "cmdp/model.hpp"
#include "cmdp/model_io.hpp"
#include "cmdp/simulate.hpp"
#include "cmdp/unconstrained.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalidModel = 1;
constexpr int kExitParse = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitIncompatible = 4;

struct SynthConfig {
  std::string model_path;
  std::string mode = "constrained";
  std::string out_path;
  std::optional<std::size_t> start_state;
  std::string start_file;
  double pivot_tol = 1e-9;
  double feasibility_tol = 1e-8;
};

struct SimulateConfig {
  std::string model_path;
  std::string policy_path;
  std::string out_prefix = "run";
  std::optional<std::size_t> start_state;
  std::string start_file;
  std::size_t rollouts = 0;
  std::uint64_t seed = 20240915;
};

struct GridConfig {
  std::size_t rows = 3;
  std::size_t cols = 3;
  double epsilon = 0.1;
  std::size_t horizon = 20;
  bool benchmark = false;
  std::string out_path;
};

int report_invalid(const cmdp::ValidationReport& report) {
  for (const std::string& issue : report.issues) std::cout << "invalid: " << issue << '\n';
  return kExitInvalidModel;
}

// Loads, validates and discount-scales a model file; exits via exception on
// parse errors and returns nullopt (after printing) on semantic ones.
std::optional<cmdp::ModelBundle> load_checked(const std::string& path) {
  cmdp::ModelBundle bundle = cmdp::load_model(path);
  cmdp::ValidationReport report = cmdp::validate_model(bundle.model);
  if (bundle.caps && report.ok()) {
    try {
      bundle.caps->validate();
    } catch (const std::invalid_argument& e) {
      report.issues.push_back(e.what());
    }
  }
  if (!report.ok()) {
    report_invalid(report);
    return std::nullopt;
  }
  bundle.model = cmdp::apply_discount(bundle.model);
  return bundle;
}

cmdp::Vector resolve_start(const std::optional<std::size_t>& start_state,
                           const std::string& start_file, std::size_t n) {
  if (start_state) {
    if (*start_state >= n)
      throw std::out_of_range("start state " + std::to_string(*start_state) +
                              " is outside the model's " + std::to_string(n) + " states");
    cmdp::Vector x1(n, 0.0);
    x1[*start_state] = 1.0;
    return x1;
  }
  if (start_file.empty()) throw std::out_of_range("give --start-state or --start-file");
  const auto x1 = cmdp::detail::parse_file(start_file).get<cmdp::Vector>();
  if (x1.size() != n)
    throw std::out_of_range("start density has " + std::to_string(x1.size()) +
                            " entries; the model has " + std::to_string(n) + " states");
  return x1;
}

int run_validate(const std::string& path) {
  cmdp::ModelBundle bundle = cmdp::load_model(path);
  cmdp::ValidationReport report = cmdp::validate_model(bundle.model);
  if (bundle.caps) {
    try {
      bundle.caps->validate();
    } catch (const std::invalid_argument& e) {
      report.issues.push_back(e.what());
    }
  }
  if (!report.ok()) return report_invalid(report);
  std::cout << "model ok: " << bundle.model.n << " states, " << bundle.model.p << " actions, horizon "
            << bundle.model.horizon << (bundle.caps ? ", density caps present" : "") << '\n';
  return kExitOk;
}

int run_synth(const SynthConfig& config) {
  const auto bundle = load_checked(config.model_path);
  if (!bundle) return kExitInvalidModel;
  const cmdp::MdpModel& model = bundle->model;

  cmdp::SimplexOptions options;
  options.pivot_tol = config.pivot_tol;
  options.feasibility_tol = config.feasibility_tol;

  std::optional<cmdp::Vector> x1;
  if (config.start_state || !config.start_file.empty())
    x1 = resolve_start(config.start_state, config.start_file, model.n);

  cmdp::PolicyBundle out;
  if (config.mode == "unconstrained") {
    auto [policy, vf] = cmdp::backward_induction(model);
    out.policy = std::move(policy);
    out.metadata.u = std::move(vf.v);
    if (x1) out.metadata.lower_bound_at = {*x1, cmdp::dot(*x1, out.metadata.u.front())};
  } else {
    if (!bundle->caps) {
      std::cerr << "error: mode '" << config.mode << "' needs density caps (key \"d\") in "
                << config.model_path << '\n';
      return kExitParse;
    }
    auto [policy, values] = config.mode == "projected"
                                ? cmdp::synthesize_projected(model, *bundle->caps, options)
                                : cmdp::synthesize(model, *bundle->caps, options);
    out.policy = std::move(policy);
    if (x1) out.metadata.lower_bound_at = {*x1, cmdp::lower_bound(values, *bundle->caps, *x1)};
    out.metadata.u = std::move(values.u);
    out.metadata.maximin_objectives = std::move(values.maximin_objectives);
  }

  cmdp::save_policy(config.out_path, out);
  std::cout << "wrote " << config.out_path << '\n';
  return kExitOk;
}

int run_simulate(const SimulateConfig& config) {
  const auto bundle = load_checked(config.model_path);
  if (!bundle) return kExitInvalidModel;
  const cmdp::MdpModel& model = bundle->model;
  const cmdp::PolicyBundle policy_bundle = cmdp::load_policy(config.policy_path);

  const cmdp::Vector x1 = resolve_start(config.start_state, config.start_file, model.n);
  const cmdp::DensityTrajectory trajectory =
      cmdp::propagate(model, policy_bundle.policy, x1, bundle->caps);
  const double exact = cmdp::expected_reward(model, policy_bundle.policy, x1);

  nlohmann::json summary;
  summary["expected_reward"] = exact;
  summary["violations"] = trajectory.violations.size();
  if (!policy_bundle.metadata.u.empty())
    summary["lower_bound"] = cmdp::dot(x1, policy_bundle.metadata.u.front());
  if (config.rollouts > 0) {
    const cmdp::McEstimate mc =
        cmdp::monte_carlo(model, policy_bundle.policy, x1, config.rollouts, config.seed);
    summary["mc_mean"] = mc.mean;
    summary["mc_stderr"] = mc.std_error;
  }

  // Reward curves compare the three synthesis modes from the same start;
  // models without caps are compared under vacuous caps d = 1.
  const cmdp::ConstraintSpec caps =
      bundle->caps ? *bundle->caps : cmdp::ConstraintSpec{cmdp::Vector(model.n, 1.0)};
  const auto [unconstrained_policy, vf] = cmdp::backward_induction(model);
  const auto [constrained_policy, constrained_values] = cmdp::synthesize(model, caps);
  const auto [projected_policy, projected_values] = cmdp::synthesize_projected(model, caps);

  cmdp::RewardCurves curves;
  curves.unconstrained = cmdp::cumulative_reward(model, unconstrained_policy, x1);
  curves.constrained = cmdp::cumulative_reward(model, constrained_policy, x1);
  curves.projected = cmdp::cumulative_reward(model, projected_policy, x1);
  curves.lower_bound = cmdp::dot(x1, constrained_values.u.front());

  const std::string trajectory_path = config.out_prefix + "_trajectory.csv";
  const std::string rewards_path = config.out_prefix + "_rewards.csv";
  const std::string summary_path = config.out_prefix + "_summary.json";
  {
    std::ofstream out(trajectory_path);
    if (!out) throw std::invalid_argument("cannot open " + trajectory_path + " for writing");
    cmdp::write_trajectory_csv(out, trajectory);
  }
  {
    std::ofstream out(rewards_path);
    if (!out) throw std::invalid_argument("cannot open " + rewards_path + " for writing");
    cmdp::write_reward_curve_csv(out, curves);
  }
  cmdp::detail::write_file(summary_path, summary);
  std::cout << "wrote " << trajectory_path << ", " << rewards_path << ", " << summary_path << '\n';
  return kExitOk;
}

int run_grid(const GridConfig& config) {
  std::pair<cmdp::MdpModel, cmdp::ConstraintSpec> instance;
  if (config.benchmark) {
    instance = cmdp::swarm_benchmark(config.epsilon, config.horizon);
  } else {
    cmdp::GridSpec spec;
    spec.rows = config.rows;
    spec.cols = config.cols;
    spec.epsilon = config.epsilon;
    spec.horizon = config.horizon;
    const std::size_t n = config.rows * config.cols;
    spec.stage_rewards.assign(n, 0.0);
    spec.terminal_rewards.assign(n, 0.0);
    spec.d.assign(n, 1.0);
    instance = cmdp::build_grid(spec);
  }
  cmdp::ModelBundle bundle{std::move(instance.first), std::move(instance.second)};
  cmdp::save_model(config.out_path, bundle);
  std::cout << "wrote " << config.out_path << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon MDP policy synthesis under per-epoch density caps"};
  app.require_subcommand(1);

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "check a model file against all invariants");
  validate->add_option("model", validate_path, "model JSON file")->required();

  SynthConfig synth_config;
  CLI::App* synth = app.add_subcommand("synth", "synthesize a policy and write it as JSON");
  synth->add_option("model", synth_config.model_path, "model JSON file")->required();
  synth->add_option("--mode", synth_config.mode, "unconstrained | constrained | projected")
      ->check(CLI::IsMember({"unconstrained", "constrained", "projected"}));
  synth->add_option("-o,--out", synth_config.out_path, "output policy file")->required();
  synth->add_option("--start-state", synth_config.start_state,
                    "embed the certified bound for this basis start");
  synth->add_option("--start-file", synth_config.start_file,
                    "embed the certified bound for this start density (JSON array)");
  synth->add_option("--pivot-tol", synth_config.pivot_tol, "simplex pivot tolerance");
  synth->add_option("--feas-tol", synth_config.feasibility_tol, "simplex feasibility tolerance");

  SimulateConfig simulate_config;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "propagate a policy, audit the caps and write CSV/JSON reports");
  simulate->add_option("model", simulate_config.model_path, "model JSON file")->required();
  simulate->add_option("policy", simulate_config.policy_path, "policy JSON file")->required();
  simulate->add_option("-o,--out-prefix", simulate_config.out_prefix, "output file prefix");
  auto* start_state_opt = simulate->add_option("--start-state", simulate_config.start_state,
                                               "start from this state (basis density)");
  simulate->add_option("--start-file", simulate_config.start_file,
                       "start density from a JSON array")
      ->excludes(start_state_opt);
  simulate->add_option("--rollouts", simulate_config.rollouts,
                       "Monte Carlo rollouts (0 skips the estimate)");
  simulate->add_option("--seed", simulate_config.seed, "Monte Carlo seed");

  GridConfig grid_config;
  CLI::App* grid = app.add_subcommand("grid", "generate a grid-navigation model file");
  grid->add_option("--rows", grid_config.rows, "grid rows")->check(CLI::PositiveNumber);
  grid->add_option("--cols", grid_config.cols, "grid columns")->check(CLI::PositiveNumber);
  grid->add_option("--epsilon", grid_config.epsilon, "action noise in [0,1)");
  grid->add_option("--horizon", grid_config.horizon, "reward stages")->check(CLI::PositiveNumber);
  grid->add_flag("--paper", grid_config.benchmark,
                 "emit the bundled 3x3 swarm coordination benchmark");
  grid->add_option("-o,--out", grid_config.out_path, "output model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    if (validate->parsed()) return run_validate(validate_path);
    if (synth->parsed()) return run_synth(synth_config);
    if (simulate->parsed()) return run_simulate(simulate_config);
    if (grid->parsed()) return run_grid(grid_config);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const cmdp::FormatError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const cmdp::StageInfeasibleError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIncompatible;
  } catch (const std::invalid_argument& e) {
    // model/policy/start disagreements surface here (shapes inside one file
    // are FormatError and already mapped to the parse exit)
    std::cerr << "error: " << e.what() << '\n';
    return (validate->parsed() || grid->parsed()) ? kExitParse : kExitIncompatible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  }
  return kExitOk;
}
