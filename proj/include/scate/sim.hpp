#pragma once

#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scate/dynamics.hpp"
#include "scate/planner.hpp"

namespace scate {

struct Waypoint {
  double t = 0.0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
};

/// Ground-truth obstacle path, piecewise linear between waypoints.
struct ObstacleScript {
  std::vector<Waypoint> waypoints;

  /// Throws std::invalid_argument unless times strictly increase and every
  /// waypoint lies in the workspace.
  void validate(const Workspace& workspace) const;
};

/// Clamped to the first/last waypoint outside the scripted interval.
Eigen::Vector2d obstacle_position(const ObstacleScript& script, double t);

/// Standard deviations used to corrupt measurements. Zero is allowed.
struct SensorNoise {
  StateVec state = StateVec::Zero();
  double bearing = 0.0;
  double range = 0.0;

  static SensorNoise from(const PlannerNoise& noise) {
    return SensorNoise{noise.meas_x, noise.bearing, noise.range};
  }
};

using Rng = std::mt19937_64;

/// Throws std::domain_error when robot and obstacle coincide.
MeasurementBundle sample_measurements(const StateVec& truth, const Eigen::Vector2d& obstacle,
                                      const SensorNoise& noise, Rng& rng, int index = 0);

/// Noisy state measurement alone (what the tracking controller sees).
StateVec sample_state(const StateVec& truth, const StateVec& sigma, Rng& rng);

struct Scenario {
  std::string name = "scenario";
  PlannerProblem problem;
  ObstacleScript obstacle;
  SensorNoise sensor = SensorNoise::from(PlannerNoise{});
  double plant_rate = 100.0;   // Hz
  double planner_rate = 2.0;   // Hz
  std::uint64_t seed = 0;
  /// 0 means horizon * dt.
  double duration = 0.0;
  GainSpec gain = default_planar_poles();
  /// Plant parameters relative to the planner model.
  double mass_scale = 1.0;
  double inertia_scale = 1.0;
  /// Clip applied controls to the control limits.
  bool saturate = true;

  double episode_duration() const { return duration > 0.0 ? duration : problem.horizon * problem.dt; }
  int ticks_per_support() const;
  int ticks_per_planner_call() const;
  /// Throws std::invalid_argument on inconsistent rates or geometry.
  void validate() const;
};

/// One field per support time from the scripted obstacle path.
SdfSequence predicted_fields(const Scenario& scenario);

/// Planner problem with the predictive field sequence filled in when needed.
PlannerProblem prepare_problem(const Scenario& scenario);

/// Analytic clearance: min over robot spheres of the gap to the obstacle disc.
double clearance(const StateVec& x, const SphereModel& spheres, const Eigen::Vector2d& obstacle,
                 double obstacle_radius);

struct TickRecord {
  double t = 0.0;
  StateVec truth = StateVec::Zero();
  ControlVec u = ControlVec::Zero();
  StateVec plan_x = StateVec::Zero();
  ControlVec plan_u = ControlVec::Zero();
  Eigen::Vector2d obstacle = Eigen::Vector2d::Zero();
  double clearance = 0.0;
};

struct StepRecord {
  StepReport report;
  double t = 0.0;
  StateVec truth = StateVec::Zero();
  Eigen::Vector2d obstacle_truth = Eigen::Vector2d::Zero();
  StateVec x_hat = StateVec::Zero();
  Eigen::Vector2d l_hat = Eigen::Vector2d::Zero();
};

enum class EpisodeStatus { Completed, Aborted };

struct EpisodeLog {
  std::string scenario;
  PlanningMode mode = PlanningMode::Reactive;
  std::uint64_t seed = 0;
  EpisodeStatus status = EpisodeStatus::Completed;
  std::string abort_reason;
  std::vector<TickRecord> ticks;
  std::vector<StepRecord> steps;
  /// Plan issued after every step, in step order.
  std::vector<PlanSnapshot> plans;
  /// Plan generated before the first measurement.
  PlanSnapshot reference;
  MapSolution final_solution;
};

EpisodeLog run_episode(const Scenario& scenario);

std::vector<double> clearance_profile(const EpisodeLog& log, const Scenario& scenario);

struct EpisodeMetrics {
  double min_clearance = 0.0;
  double terminal_position_error = 0.0;
  double terminal_attitude_error = 0.0;  // rad
  /// RMS distance between truth and the initial plan.
  double tracking_rmse = 0.0;
  /// RMS distance between truth and the plan active at each tick.
  double plan_tracking_rmse = 0.0;
  double obstacle_rmse = 0.0;
  StateVec state_rmse = StateVec::Zero();
  double median_step_ms = 0.0;
  int flagged_steps = 0;
  bool collision_free = false;
  bool goal_reached = false;
};

struct GoalTolerance {
  double position = 0.1;                                   // m
  double attitude = 5.0 * std::numbers::pi / 180.0;  // rad
};

EpisodeMetrics compute_metrics(const EpisodeLog& log, const Scenario& scenario,
                               const GoalTolerance& tol = {});

double median(std::vector<double> v);

/// One row per plant tick: t, truth[6], u[3], plan_x[6], plan_u[3], clearance.
void write_log_csv(const EpisodeLog& log, std::ostream& out);

/// Per-step summary plus metrics. Timing is kept under the "timing" key so
/// the rest of the document is reproducible.
nlohmann::json log_to_json(const EpisodeLog& log, const EpisodeMetrics& metrics);

}  // namespace scate
