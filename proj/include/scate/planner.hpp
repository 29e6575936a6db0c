#pragma once

#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scate/dynamics.hpp"
#include "scate/factor_graph.hpp"
#include "scate/factors.hpp"
#include "scate/obstacle_field.hpp"
#include "scate/optimizer.hpp"

namespace scate {

enum class PlanningMode { Reactive, Predictive };

std::string_view to_string(PlanningMode mode);
/// Accepts "reactive" / "predictive".
std::optional<PlanningMode> parse_mode(std::string_view text);

/// Standard deviations of every factor family.
struct PlannerNoise {
  double fix = 1e-4;
  double dyn = 1e-3;
  double lim = 1e-2;
  double obs = 0.05;
  StateVec meas_x = (StateVec() << 0.01, 0.01, 0.01, 0.01, 0.5 * kDeg, 0.5 * kDeg).finished();
  double bearing = 2.0 * kDeg;
  double range = 0.02;

  static constexpr double kDeg = std::numbers::pi / 180.0;
};

struct PlannerProblem {
  PlanarParams params;
  StateVec x_start = StateVec::Zero();
  StateVec x_goal = StateVec::Zero();
  int horizon = 60;
  double dt = 1.0;
  PlannerNoise noise;
  ControlLimits limits = ControlLimits::planar_default();
  SphereModel spheres;
  double eps = 0.4;
  Workspace workspace;
  SdfOptions sdf;
  double obstacle_radius = 0.15;
  PlanningMode mode = PlanningMode::Reactive;
  /// Fold executed steps into a linear summary on the current state instead
  /// of re-solving them every step. Same optimum; falls back to the full graph
  /// when the past is not purely linear.
  bool condense_past = true;
  /// Predictive mode: one field per support time 0..N.
  SdfSequence predicted;
  LmConfig lm;

  /// Throws std::invalid_argument on a malformed problem.
  void validate() const;
};

struct MeasurementBundle {
  int index = 0;
  StateVec z_x = StateVec::Zero();
  BearingRangeMeas z_l;
};

/// Joint estimate/plan. Keys with index <= split_index are estimates, the
/// rest are plans. split_index is -1 before the first measurement.
struct MapSolution {
  Values values;
  int split_index = -1;
  int horizon = 0;
  double dt = 1.0;
  LmStats stats;
};

/// Ids of the factors the replanning step edits later.
struct FactorTable {
  FactorId start;
  FactorId goal;
  std::vector<FactorId> dynamics;     // i = 0..N-1
  std::vector<FactorId> limits;       // i = 0..N-1
  std::vector<FactorId> obstacles;    // i = 0..N
  std::vector<FactorId> state_meas;   // filled as measurements arrive
  std::vector<FactorId> bearing_range;
};

/// States interpolated from start to goal (heading along the shortest arc),
/// zero controls.
Values initial_guess(const PlannerProblem& problem);

struct InitialGraph {
  FactorGraph graph;
  FactorTable table;
};

InitialGraph build_initial_graph(const PlannerProblem& problem);

/// Field assigned to future obstacle factors in reactive mode.
SdfPtr reactive_field(const PlannerProblem& problem, const Eigen::Vector2d& obstacle);

struct StepReport {
  int index = 0;
  int obstacle_replacements = 0;
  int added = 0;
  int removed = 0;
  bool removed_start = false;
  bool removed_goal = false;
  double wall_ms = 0.0;
  LmStats stats;
  bool flagged = false;
  std::string failure;
  Eigen::Vector2d obstacle_meas = Eigen::Vector2d::Zero();
};

/// Immutable plan handed to the plant: anchor x_i, states i+1..N and
/// controls i..N-1. Controls are held, states interpolated linearly.
struct PlanSnapshot {
  int start_index = 0;
  double dt = 1.0;
  StateVec anchor = StateVec::Zero();
  std::vector<StateVec> states;
  std::vector<ControlVec> controls;

  double start_time() const { return start_index * dt; }
  double end_time() const { return (start_index + static_cast<int>(states.size())) * dt; }
  /// Past the end, holds the terminal state with zero control.
  StateVec state_at(double t) const;
  ControlVec control_at(double t) const;
};

/// Throws std::logic_error once the episode is complete (i = N).
PlanSnapshot extract_plan(const MapSolution& solution);

void to_json(nlohmann::json& j, const PlanSnapshot& plan);
void from_json(const nlohmann::json& j, PlanSnapshot& plan);

/// One planner per episode: holds the graph, the id table and the current
/// MAP solution, and runs one replanning step per measurement.
class Planner {
 public:
  /// Builds the initial graph and solves for the initial plan. Throws if
  /// the initial optimization fails.
  explicit Planner(PlannerProblem problem);

  const PlannerProblem& problem() const { return problem_; }
  const FactorGraph& graph() const { return graph_; }
  const FactorTable& table() const { return table_; }
  const MapSolution& solution() const { return solution_; }
  /// The support index the next measurement must carry.
  int next_index() const { return solution_.split_index + 1; }
  bool done() const { return solution_.split_index >= problem_.horizon; }

  /// Adds the measurement factors, removes outdated factors, reassigns future
  /// obstacle costs (reactive only) and re-optimizes from the previous
  /// solution. Optimizer failure keeps the previous plan and flags the report.
  StepReport step(const MeasurementBundle& meas);

  /// True while executed steps are being condensed.
  bool condensing() const { return condensing_; }

 private:
  // (x_k, u_k) = ref + offset + gain * (x_{k+1} - ref_next)
  struct PastConditional {
    Eigen::Matrix<double, kStateDim + kControlDim, kStateDim> gain;
    Eigen::Matrix<double, kStateDim + kControlDim, 1> offset;
    StateVec ref_x;
    ControlVec ref_u;
    StateVec ref_next;
  };

  bool condense(int k, const Values& values);
  FactorGraph active_graph(int i) const;
  void recover_past(Values& values, int i) const;

  PlannerProblem problem_;
  FactorGraph graph_;
  FactorTable table_;
  MapSolution solution_;
  bool condensing_ = false;
  std::vector<PastConditional> past_;
  std::shared_ptr<const LinearStateFactor> summary_;
  std::vector<BearingRangeMeas> z_l_;
};

}  // namespace scate
