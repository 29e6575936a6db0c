#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "scate/scenario_io.hpp"
#include "scate/sim.hpp"

using namespace scate;

namespace {

Scenario load(const char* name) {
  return parse_scenario((std::filesystem::path(SCATE_SCENARIO_DIR) / name).string());
}

// Short obstacle-free hop, cheap enough to run several times.
Scenario hop() {
  Scenario s = load("static.yaml");
  s.problem.horizon = 12;
  s.problem.x_goal[state::kX] = 1.5;
  s.problem.x_goal[state::kY] = 1.2;
  s.obstacle.waypoints = {{0.0, Eigen::Vector2d(3.5, 3.5)}};
  return s;
}

}  // namespace

TEST_CASE("scripted obstacle path") {
  ObstacleScript s;
  s.waypoints = {{0.0, Eigen::Vector2d(1, 1)}, {10.0, Eigen::Vector2d(1, 1)}, {20.0, Eigen::Vector2d(3, 2)}};
  CHECK(obstacle_position(s, -5.0) == Eigen::Vector2d(1, 1));
  CHECK(obstacle_position(s, 5.0) == Eigen::Vector2d(1, 1));
  CHECK(obstacle_position(s, 15.0).isApprox(Eigen::Vector2d(2.0, 1.5)));
  CHECK(obstacle_position(s, 25.0) == Eigen::Vector2d(3, 2));
  CHECK_NOTHROW(s.validate(Workspace{}));
  s.waypoints[2].t = 10.0;
  CHECK_THROWS_AS(s.validate(Workspace{}), std::invalid_argument);
  s.waypoints[2].t = 20.0;
  s.waypoints[2].position = Eigen::Vector2d(4.5, 1.0);
  CHECK_THROWS_AS(s.validate(Workspace{}), std::invalid_argument);
}

TEST_CASE("noise-free measurements are exact") {
  StateVec x = StateVec::Zero();
  x[state::kX] = 1.0;
  x[state::kY] = 2.0;
  x[state::kPsi] = 0.4;
  Rng rng(1);
  const MeasurementBundle m = sample_measurements(x, Eigen::Vector2d(0.0, 3.0), SensorNoise{}, rng, 7);
  CHECK(m.index == 7);
  CHECK(m.z_x == x);
  CHECK(m.z_l.bearing == doctest::Approx(3.0 * std::numbers::pi / 4.0));
  CHECK(m.z_l.range == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(sample_measurements(x, Eigen::Vector2d(1.0, 2.0), SensorNoise{}, rng), std::domain_error);
}

TEST_CASE("measurement noise has the configured spread") {
  SensorNoise noise;
  noise.bearing = 0.05;
  noise.range = 0.02;
  noise.state = StateVec::Constant(0.01);
  Rng rng(17);
  const StateVec x = StateVec::Zero();
  const int n = 20000;
  double sb = 0.0;
  double sr = 0.0;
  double sx = 0.0;
  double mean_b = 0.0;
  for (int k = 0; k < n; ++k) {
    const MeasurementBundle m = sample_measurements(x, Eigen::Vector2d(2.0, 0.0), noise, rng);
    sb += m.z_l.bearing * m.z_l.bearing;
    mean_b += m.z_l.bearing;
    sr += (m.z_l.range - 2.0) * (m.z_l.range - 2.0);
    sx += m.z_x[state::kY] * m.z_x[state::kY];
  }
  CHECK(std::abs(std::sqrt(sb / n) / 0.05 - 1.0) < 0.1);
  CHECK(std::abs(std::sqrt(sr / n) / 0.02 - 1.0) < 0.1);
  CHECK(std::abs(std::sqrt(sx / n) / 0.01 - 1.0) < 0.1);
  CHECK(std::abs(mean_b / n) < 0.005);
}

TEST_CASE("analytic clearance") {
  SphereModel m;
  m.spheres = {Sphere{Eigen::Vector2d(0.2, 0.0), 0.1}, Sphere{Eigen::Vector2d(-0.2, 0.0), 0.1}};
  StateVec x = StateVec::Zero();
  CHECK(clearance(x, m, Eigen::Vector2d(1.0, 0.0), 0.15) == doctest::Approx(0.55));
  x[state::kPsi] = std::numbers::pi;
  CHECK(clearance(x, m, Eigen::Vector2d(1.0, 0.0), 0.15) == doctest::Approx(0.55));
  x[state::kPsi] = std::numbers::pi / 2.0;
  CHECK(clearance(x, m, Eigen::Vector2d(1.0, 0.0), 0.15) == doctest::Approx(std::sqrt(1.04) - 0.25));
  CHECK(clearance(StateVec::Zero(), m, Eigen::Vector2d(0.0, 0.0), 0.15) < 0.0);
}

TEST_CASE("scenario timing checks") {
  Scenario s = hop();
  CHECK(s.ticks_per_support() == 100);
  CHECK(s.ticks_per_planner_call() == 50);
  CHECK(s.episode_duration() == 12.0);
  s.planner_rate = 3.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.planner_rate = 200.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("predicted fields follow the script") {
  Scenario s = load("moving_predictive.yaml");
  const SdfSequence seq = predicted_fields(s);
  REQUIRE(seq.fields.size() == 61);
  CHECK(seq.fields[0] == seq.fields[10]);
  CHECK(seq.fields[10] != seq.fields[11]);
  const Eigen::Vector2d c = seq.fields[30]->source().at(0).center;
  CHECK(c.isApprox(obstacle_position(s.obstacle, 30.0)));
  CHECK(prepare_problem(s).predicted.fields.size() == 61);
}

TEST_CASE("episodes are deterministic and continuous") {
  const Scenario s = hop();
  const EpisodeLog a = run_episode(s);
  const EpisodeLog b = run_episode(s);
  REQUIRE(a.status == EpisodeStatus::Completed);
  std::ostringstream ca;
  std::ostringstream cb;
  write_log_csv(a, ca);
  write_log_csv(b, cb);
  CHECK(ca.str() == cb.str());

  std::istringstream lines(ca.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header ==
        "t,x,vx,y,vy,psi,omega,fx,fy,tau,plan_x,plan_vx,plan_y,plan_vy,plan_psi,plan_omega,"
        "plan_fx,plan_fy,plan_tau,clearance");
  CHECK(a.ticks.size() == 12u * 100u + 1u);
  CHECK(a.steps.size() == 13);
  CHECK(a.plans.size() == a.steps.size() - 1);

  // Truth never jumps: bounded speed over one plant tick.
  for (std::size_t k = 1; k < a.ticks.size(); ++k) {
    const StateVec& p = a.ticks[k - 1].truth;
    const StateVec& q = a.ticks[k].truth;
    CHECK(a.ticks[k].t > a.ticks[k - 1].t);
    const double step = std::hypot(q[state::kX] - p[state::kX], q[state::kY] - p[state::kY]);
    CHECK(step < 0.01 * 1.0);
  }

  const EpisodeMetrics m = compute_metrics(a, s);
  CHECK(m.goal_reached);
  CHECK(m.collision_free);
  CHECK(m.tracking_rmse < 0.05);

  // Timing lives in its own section; the rest reproduces.
  nlohmann::json ja = log_to_json(a, m);
  nlohmann::json jb = log_to_json(b, compute_metrics(b, s));
  ja.erase("timing");
  jb.erase("timing");
  CHECK(ja.dump() == jb.dump());

  Scenario other = s;
  other.seed = s.seed + 1;
  std::ostringstream cc;
  write_log_csv(run_episode(other), cc);
  CHECK(cc.str() != ca.str());
}

TEST_CASE("metrics helpers") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  const Scenario s = hop();
  const EpisodeLog log = run_episode(s);
  const std::vector<double> prof = clearance_profile(log, s);
  REQUIRE(prof.size() == log.ticks.size());
  for (std::size_t k = 0; k < prof.size(); ++k) CHECK(prof[k] == doctest::Approx(log.ticks[k].clearance));
}
