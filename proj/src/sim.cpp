#include "scate/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace scate {

void ObstacleScript::validate(const Workspace& workspace) const {
  if (waypoints.empty()) throw std::invalid_argument("obstacle script needs at least one waypoint");
  for (std::size_t k = 0; k < waypoints.size(); ++k) {
    const Waypoint& w = waypoints[k];
    if (!std::isfinite(w.t) || !w.position.allFinite()) {
      throw std::invalid_argument("obstacle waypoint " + std::to_string(k) + " is not finite");
    }
    if (k > 0 && !(w.t > waypoints[k - 1].t)) {
      throw std::invalid_argument("obstacle waypoint times must strictly increase");
    }
    if (!workspace.contains(w.position)) {
      throw std::invalid_argument("obstacle waypoint " + std::to_string(k) + " outside workspace");
    }
  }
}

Eigen::Vector2d obstacle_position(const ObstacleScript& script, double t) {
  const auto& w = script.waypoints;
  if (w.empty()) throw std::invalid_argument("empty obstacle script");
  if (t <= w.front().t) return w.front().position;
  if (t >= w.back().t) return w.back().position;
  const auto hi = std::upper_bound(w.begin(), w.end(), t,
                                   [](double v, const Waypoint& p) { return v < p.t; });
  const auto lo = hi - 1;
  const double f = (t - lo->t) / (hi->t - lo->t);
  return (1.0 - f) * lo->position + f * hi->position;
}

StateVec sample_state(const StateVec& truth, const StateVec& sigma, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  StateVec z = truth;
  for (int k = 0; k < kStateDim; ++k) z[k] += sigma[k] * gauss(rng);
  z[state::kPsi] = wrap_angle(z[state::kPsi]);
  return z;
}

MeasurementBundle sample_measurements(const StateVec& truth, const Eigen::Vector2d& obstacle,
                                      const SensorNoise& noise, Rng& rng, int index) {
  const Eigen::Vector2d d(obstacle.x() - truth[state::kX], obstacle.y() - truth[state::kY]);
  const double rho = d.norm();
  if (!(rho > 1e-9)) throw std::domain_error("robot and obstacle coincide");
  MeasurementBundle m;
  m.index = index;
  m.z_x = sample_state(truth, noise.state, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double e_bearing = gauss(rng);
  const double e_range = gauss(rng);
  m.z_l.bearing = wrap_angle(std::atan2(d.y(), d.x()) + noise.bearing * e_bearing);
  m.z_l.range = std::max(0.0, rho + noise.range * e_range);
  return m;
}

int Scenario::ticks_per_support() const {
  return static_cast<int>(std::llround(problem.dt * plant_rate));
}

int Scenario::ticks_per_planner_call() const {
  return static_cast<int>(std::llround(plant_rate / planner_rate));
}

void Scenario::validate() const {
  if (problem.mode == PlanningMode::Predictive && problem.predicted.fields.empty()) {
    // Fields come from the obstacle script in prepare_problem.
    PlannerProblem p = problem;
    p.mode = PlanningMode::Reactive;
    p.validate();
  } else {
    problem.validate();
  }
  if (!(plant_rate > 0.0) || !(planner_rate > 0.0)) throw std::invalid_argument("rates must be positive");
  if (plant_rate < planner_rate) throw std::invalid_argument("plant_rate must be >= planner_rate");
  auto is_int = [](double v) { return std::abs(v - std::round(v)) < 1e-9 && std::round(v) >= 1; };
  if (!is_int(plant_rate / planner_rate)) {
    throw std::invalid_argument("plant_rate / planner_rate must be an integer");
  }
  if (!is_int(problem.dt * plant_rate)) throw std::invalid_argument("dt * plant_rate must be an integer");
  if (ticks_per_support() % ticks_per_planner_call() != 0) {
    throw std::invalid_argument("dt must be a whole number of planner periods");
  }
  if (!(duration >= 0.0)) throw std::invalid_argument("duration must be >= 0");
  if (!(mass_scale > 0.0) || !(inertia_scale > 0.0)) {
    throw std::invalid_argument("plant parameter scales must be positive");
  }
  if (!(sensor.state.array() >= 0.0).all() || !(sensor.bearing >= 0.0) || !(sensor.range >= 0.0)) {
    throw std::invalid_argument("sensor noise must be >= 0");
  }
  obstacle.validate(problem.workspace);
}

SdfSequence predicted_fields(const Scenario& scenario) {
  const PlannerProblem& p = scenario.problem;
  SdfSequence seq;
  // Consecutive equal positions share one field.
  std::map<std::pair<double, double>, SdfPtr> cache;
  for (int k = 0; k <= p.horizon; ++k) {
    const Eigen::Vector2d l = obstacle_position(scenario.obstacle, k * p.dt);
    SdfPtr& f = cache[{l.x(), l.y()}];
    if (!f) f = reactive_field(p, l);
    seq.fields.push_back(f);
  }
  return seq;
}

PlannerProblem prepare_problem(const Scenario& scenario) {
  PlannerProblem p = scenario.problem;
  if (p.mode == PlanningMode::Predictive && p.predicted.fields.empty()) {
    p.predicted = predicted_fields(scenario);
  }
  return p;
}

double clearance(const StateVec& x, const SphereModel& spheres, const Eigen::Vector2d& obstacle,
                 double obstacle_radius) {
  double best = std::numeric_limits<double>::infinity();
  for (const PlacedSphere& s : robot_spheres(x, spheres)) {
    best = std::min(best, (s.center - obstacle).norm() - obstacle_radius - s.radius);
  }
  return best;
}

namespace {

ControlVec saturate(const ControlVec& u, const ControlLimits& lim) {
  ControlVec out;
  for (int j = 0; j < kControlDim; ++j) out[j] = std::clamp(u[j], lim.lower[j], lim.upper[j]);
  return out;
}

}  // namespace

EpisodeLog run_episode(const Scenario& scenario) {
  scenario.validate();
  const PlannerProblem& prob = scenario.problem;
  EpisodeLog log;
  log.scenario = scenario.name;
  log.mode = prob.mode;
  log.seed = scenario.seed;

  Rng rng(scenario.seed);
  const ContinuousModel cont = planar_model(prob.params.mass, prob.params.inertia);
  const FeedbackGain gain = design_gain(cont.A, cont.B, scenario.gain);
  const ContinuousModel truth_model =
      planar_model(prob.params.mass * scenario.mass_scale, prob.params.inertia * scenario.inertia_scale);
  const DiscreteModel plant =
      discretize_lti(truth_model.A, truth_model.B, 1.0 / scenario.plant_rate);

  Planner planner(prepare_problem(scenario));
  log.reference = extract_plan(planner.solution());
  PlanSnapshot plan = log.reference;

  const int per_support = scenario.ticks_per_support();
  const int per_call = scenario.ticks_per_planner_call();
  const long total = std::llround(scenario.episode_duration() * scenario.plant_rate);

  StateVec x = prob.x_start;
  x[state::kPsi] = wrap_angle(x[state::kPsi]);

  for (long tick = 0; tick <= total; ++tick) {
    const double t = static_cast<double>(tick) / scenario.plant_rate;
    const Eigen::Vector2d l_true = obstacle_position(scenario.obstacle, t);

    StateVec z_x;
    bool finished = false;
    const bool support_tick = tick % per_call == 0 && tick % per_support == 0;
    if (support_tick && !planner.done() && planner.next_index() == tick / per_support) {
      MeasurementBundle bundle;
      try {
        bundle = sample_measurements(x, l_true, scenario.sensor, rng, planner.next_index());
      } catch (const std::domain_error& e) {
        log.status = EpisodeStatus::Aborted;
        log.abort_reason = e.what();
        break;
      }
      z_x = bundle.z_x;
      StepRecord rec;
      rec.report = planner.step(bundle);
      rec.t = t;
      rec.truth = x;
      rec.obstacle_truth = l_true;
      const int i = rec.report.index;
      rec.x_hat = planner.solution().values.at(X(i));
      rec.l_hat = planner.solution().values.at(L(i));
      log.steps.push_back(std::move(rec));
      if (planner.done()) {
        finished = true;
      } else {
        plan = extract_plan(planner.solution());
        log.plans.push_back(plan);
      }
    } else {
      z_x = sample_state(x, scenario.sensor.state, rng);
    }

    TickRecord row;
    row.t = t;
    row.truth = x;
    row.obstacle = l_true;
    row.clearance = clearance(x, prob.spheres, l_true, prob.obstacle_radius);
    row.plan_x = plan.state_at(t);
    if (finished || tick == total) {
      log.ticks.push_back(row);
      break;
    }
    row.plan_u = plan.control_at(t);
    ControlVec u = row.plan_u - gain.K * state_difference(z_x, row.plan_x);
    if (scenario.saturate) u = saturate(u, prob.limits);
    row.u = u;
    log.ticks.push_back(row);

    x = propagate_plant(x, u, plant);
    if (!x.allFinite()) {
      log.status = EpisodeStatus::Aborted;
      log.abort_reason = "non-finite truth state";
      break;
    }
  }
  log.final_solution = planner.solution();
  return log;
}

std::vector<double> clearance_profile(const EpisodeLog& log, const Scenario& scenario) {
  std::vector<double> out;
  out.reserve(log.ticks.size());
  for (const TickRecord& r : log.ticks) {
    const Eigen::Vector2d l = obstacle_position(scenario.obstacle, r.t);
    out.push_back(clearance(r.truth, scenario.problem.spheres, l, scenario.problem.obstacle_radius));
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

EpisodeMetrics compute_metrics(const EpisodeLog& log, const Scenario& scenario,
                               const GoalTolerance& tol) {
  EpisodeMetrics m;
  m.min_clearance = std::numeric_limits<double>::infinity();
  double track = 0.0;
  double plan_track = 0.0;
  for (const TickRecord& r : log.ticks) {
    m.min_clearance = std::min(m.min_clearance, r.clearance);
    const Eigen::Vector2d p(r.truth[state::kX], r.truth[state::kY]);
    const StateVec ref = log.reference.state_at(r.t);
    track += (p - Eigen::Vector2d(ref[state::kX], ref[state::kY])).squaredNorm();
    plan_track += (p - Eigen::Vector2d(r.plan_x[state::kX], r.plan_x[state::kY])).squaredNorm();
  }
  if (!log.ticks.empty()) {
    const double n = static_cast<double>(log.ticks.size());
    m.tracking_rmse = std::sqrt(track / n);
    m.plan_tracking_rmse = std::sqrt(plan_track / n);
    const StateVec& xf = log.ticks.back().truth;
    const StateVec& goal = scenario.problem.x_goal;
    m.terminal_position_error =
        std::hypot(xf[state::kX] - goal[state::kX], xf[state::kY] - goal[state::kY]);
    m.terminal_attitude_error = std::abs(wrap_angle(xf[state::kPsi] - goal[state::kPsi]));
  }

  // Smoothed estimates from the last solution against truth at support times.
  double l_err = 0.0;
  StateVec x_err = StateVec::Zero();
  int count = 0;
  std::vector<double> step_ms;
  for (const StepRecord& s : log.steps) {
    const int i = s.report.index;
    const Values& v = log.final_solution.values;
    if (v.contains(L(i))) {
      l_err += (Eigen::Vector2d(v.at(L(i))) - s.obstacle_truth).squaredNorm();
      const StateVec d = state_difference(StateVec(v.at(X(i))), s.truth);
      x_err += d.cwiseAbs2();
      ++count;
    }
    step_ms.push_back(s.report.wall_ms);
    if (s.report.flagged) ++m.flagged_steps;
  }
  if (count > 0) {
    m.obstacle_rmse = std::sqrt(l_err / count);
    m.state_rmse = (x_err / count).cwiseSqrt();
  }
  m.median_step_ms = median(step_ms);
  m.collision_free = log.status == EpisodeStatus::Completed && m.min_clearance > 0.0;
  m.goal_reached = log.status == EpisodeStatus::Completed &&
                   m.terminal_position_error < tol.position &&
                   m.terminal_attitude_error < tol.attitude;
  return m;
}

void write_log_csv(const EpisodeLog& log, std::ostream& out) {
  const auto precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "t,x,vx,y,vy,psi,omega,fx,fy,tau,"
         "plan_x,plan_vx,plan_y,plan_vy,plan_psi,plan_omega,plan_fx,plan_fy,plan_tau,clearance\n";
  for (const TickRecord& r : log.ticks) {
    out << r.t;
    for (int k = 0; k < kStateDim; ++k) out << ',' << r.truth[k];
    for (int k = 0; k < kControlDim; ++k) out << ',' << r.u[k];
    for (int k = 0; k < kStateDim; ++k) out << ',' << r.plan_x[k];
    for (int k = 0; k < kControlDim; ++k) out << ',' << r.plan_u[k];
    out << ',' << r.clearance << '\n';
  }
  out.precision(precision);
}

nlohmann::json log_to_json(const EpisodeLog& log, const EpisodeMetrics& metrics) {
  using nlohmann::json;
  json steps = json::array();
  json timing = json::array();
  for (const StepRecord& s : log.steps) {
    const StepReport& r = s.report;
    steps.push_back({{"index", r.index},
                     {"iterations", r.stats.iterations},
                     {"linear_solves", r.stats.linear_solves},
                     {"final_error", r.stats.final_error},
                     {"converged", r.stats.converged},
                     {"flagged", r.flagged},
                     {"failure", r.failure},
                     {"obstacle_replacements", r.obstacle_replacements},
                     {"factors_added", r.added},
                     {"factors_removed", r.removed},
                     {"l_hat", {s.l_hat.x(), s.l_hat.y()}},
                     {"l_true", {s.obstacle_truth.x(), s.obstacle_truth.y()}}});
    timing.push_back(r.wall_ms);
  }
  json summary = {{"min_clearance", metrics.min_clearance},
                  {"terminal_position_error", metrics.terminal_position_error},
                  {"terminal_attitude_error_deg", metrics.terminal_attitude_error * 180.0 / std::numbers::pi},
                  {"tracking_rmse", metrics.tracking_rmse},
                  {"plan_tracking_rmse", metrics.plan_tracking_rmse},
                  {"obstacle_rmse", metrics.obstacle_rmse},
                  {"state_rmse", std::vector<double>(metrics.state_rmse.data(), metrics.state_rmse.data() + kStateDim)},
                  {"flagged_steps", metrics.flagged_steps},
                  {"collision_free", metrics.collision_free},
                  {"goal_reached", metrics.goal_reached}};
  return json{{"scenario", log.scenario},
              {"mode", std::string(to_string(log.mode))},
              {"seed", log.seed},
              {"status", log.status == EpisodeStatus::Completed ? "completed" : "aborted"},
              {"abort_reason", log.abort_reason},
              {"summary", summary},
              {"steps", steps},
              {"timing", {{"step_ms", timing}, {"median_step_ms", metrics.median_step_ms}}}};
}

}  // namespace scate
