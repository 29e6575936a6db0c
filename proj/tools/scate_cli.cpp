// scate_cli: run SCATE episodes from a scenario file, compare planning modes
// over seeds, or run the verification suites.
//
//   scate_cli run    --scenario scenarios/static.yaml [--mode predictive] [--seed 3] [--out out/]
//   scate_cli sweep  --scenario scenarios/moving_reactive.yaml --seeds 10 [--out out/]
//   scate_cli verify

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scate/scenario_io.hpp"
#include "scate/sim.hpp"
#include "scate/verify.hpp"

namespace fs = std::filesystem;
using namespace scate;

namespace {

constexpr int kOk = 0;
constexpr int kNavigationFailure = 1;
constexpr int kConfigError = 2;
constexpr int kInternalError = 3;

struct RunConfig {
  std::string scenario;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  bool record_plans = false;
  int seeds = 10;
};

Scenario load(const RunConfig& cfg) {
  Scenario s = parse_scenario(cfg.scenario);
  if (!cfg.mode.empty()) {
    const auto m = parse_mode(cfg.mode);
    if (!m) throw ScenarioError("--mode must be reactive or predictive", 0);
    s.problem.mode = *m;
  }
  if (cfg.seed) s.seed = *cfg.seed;
  return s;
}

std::string stem(const Scenario& s) {
  return s.name + "_" + std::string(to_string(s.problem.mode)) + "_seed" + std::to_string(s.seed);
}

void write_outputs(const fs::path& dir, const Scenario& s, const EpisodeLog& log,
                   const EpisodeMetrics& m, bool record_plans) {
  fs::create_directories(dir);
  const fs::path base = dir / stem(s);
  {
    std::ofstream csv(base.string() + ".csv");
    write_log_csv(log, csv);
    if (!csv) throw std::runtime_error("cannot write " + base.string() + ".csv");
  }
  {
    std::ofstream js(base.string() + ".json");
    js << log_to_json(log, m).dump(2) << '\n';
    if (!js) throw std::runtime_error("cannot write " + base.string() + ".json");
  }
  if (record_plans) {
    std::ofstream js(base.string() + "_plans.json");
    js << nlohmann::json(log.plans).dump() << '\n';
  }
}

int cmd_run(const RunConfig& cfg) {
  const Scenario s = load(cfg);
  const EpisodeLog log = run_episode(s);
  const EpisodeMetrics m = compute_metrics(log, s);
  write_outputs(cfg.out, s, log, m, cfg.record_plans);

  std::printf("scenario %s, mode %s, seed %llu\n", s.name.c_str(),
              std::string(to_string(s.problem.mode)).c_str(),
              static_cast<unsigned long long>(s.seed));
  std::printf("  status              %s\n",
              log.status == EpisodeStatus::Completed ? "completed" : log.abort_reason.c_str());
  std::printf("  goal position error %.4f m\n", m.terminal_position_error);
  std::printf("  goal attitude error %.3f deg\n", m.terminal_attitude_error * 180.0 / std::numbers::pi);
  std::printf("  min clearance       %.4f m\n", m.min_clearance);
  std::printf("  tracking rmse       %.4f m\n", m.tracking_rmse);
  std::printf("  median step time    %.2f ms\n", m.median_step_ms);
  std::printf("  flagged steps       %d\n", m.flagged_steps);
  return m.collision_free && m.goal_reached ? kOk : kNavigationFailure;
}

int cmd_sweep(const RunConfig& cfg) {
  const Scenario base = load(cfg);
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  std::ofstream table(dir / (base.name + "_sweep.csv"));
  table << "seed,mode,tracking_rmse,min_clearance,median_step_ms,goal_reached,collision_free\n";
  std::printf("%6s %11s %14s %14s %10s %5s\n", "seed", "mode", "tracking_rmse", "min_clearance",
              "step_ms", "goal");
  bool all_ok = true;
  for (int k = 0; k < cfg.seeds; ++k) {
    for (PlanningMode mode : {PlanningMode::Reactive, PlanningMode::Predictive}) {
      Scenario s = base;
      s.seed = base.seed + static_cast<std::uint64_t>(k);
      s.problem.mode = mode;
      const EpisodeLog log = run_episode(s);
      const EpisodeMetrics m = compute_metrics(log, s);
      write_outputs(dir, s, log, m, false);
      all_ok = all_ok && m.collision_free;
      std::printf("%6llu %11s %14.4f %14.4f %10.2f %5s\n", static_cast<unsigned long long>(s.seed),
                  std::string(to_string(mode)).c_str(), m.tracking_rmse, m.min_clearance,
                  m.median_step_ms, m.goal_reached ? "yes" : "no");
      table << s.seed << ',' << to_string(mode) << ',' << m.tracking_rmse << ',' << m.min_clearance
            << ',' << m.median_step_ms << ',' << m.goal_reached << ',' << m.collision_free << '\n';
    }
  }
  return all_ok ? kOk : kNavigationFailure;
}

int cmd_verify() {
  const std::vector<CheckResult> results = run_verification();
  int failed = 0;
  for (const CheckResult& r : results) {
    std::printf("%-4s %-15s %-50s %s\n", r.passed ? "PASS" : "FAIL", r.suite.c_str(), r.name.c_str(),
                r.detail.c_str());
    if (!r.passed) ++failed;
  }
  std::printf("%zu checks, %d failed\n", results.size(), failed);
  return failed == 0 ? kOk : kNavigationFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SCATE planner and closed-loop simulator"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&cfg](CLI::App* sub) {
    sub->add_option("--scenario", cfg.scenario, "scenario file (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--mode", cfg.mode, "override planning mode")->check(CLI::IsMember({"reactive", "predictive"}));
    sub->add_option("--seed", cfg.seed, "override noise seed");
    sub->add_option("--out", cfg.out, "output directory");
  };
  CLI::App* run = app.add_subcommand("run", "run one episode");
  add_common(run);
  run->add_flag("--record-plans", cfg.record_plans, "also write every plan snapshot as JSON");
  CLI::App* sweep = app.add_subcommand("sweep", "paired reactive/predictive runs over seeds");
  add_common(sweep);
  sweep->add_option("--seeds", cfg.seeds, "number of seeds")->check(CLI::PositiveNumber);
  app.add_subcommand("verify", "run the verification suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(cfg);
    if (*sweep) return cmd_sweep(cfg);
    return cmd_verify();
  } catch (const ScenarioError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}
