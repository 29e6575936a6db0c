// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scate/factors.hpp"
#include "scate/optimizer.hpp"
#include "scate/planner.hpp"
#include "scate/scenario_io.hpp"
#include "scate/sim.hpp"

using namespace scate;

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kPi = std::numbers::pi;
constexpr int kSeeds = 10;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Scenario load(const char* name) {
  return parse_scenario((std::filesystem::path(SCATE_SCENARIO_DIR) / name).string());
}

std::string csv_of(const EpisodeLog& log) {
  std::ostringstream os;
  write_log_csv(log, os);
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. Jacobians

struct Case {
  FactorTag tag;
  FactorPtr factor;
  std::function<Values(std::mt19937_64&)> sample;
  std::function<bool(const Values&)> kink;
};

double uni(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

StateVec random_state(std::mt19937_64& rng) {
  StateVec x;
  x << uni(rng, 0.2, 3.8), uni(rng, -1, 1), uni(rng, 0.2, 3.8), uni(rng, -1, 1), uni(rng, -3.1, 3.1),
      uni(rng, -1, 1);
  return x;
}

std::vector<Case> jacobian_cases() {
  std::vector<Case> cases;
  StateVec target;
  target << 1.2, -0.3, 2.2, 0.4, -2.9, 0.2;
  for (FactorTag tag : {FactorTag::Start, FactorTag::Goal, FactorTag::StateMeasurement}) {
    const Eigen::VectorXd sig = (Eigen::VectorXd(6) << 0.1, 0.2, 0.1, 0.2, 0.05, 0.1).finished();
    auto f = PriorFactor::on_state(X(0), target, NoiseModel::from_sigmas(sig), tag);
    cases.push_back({tag, f,
                     [](std::mt19937_64& rng) {
                       Values v;
                       v.insert(X(0), random_state(rng));
                       return v;
                     },
                     [target](const Values& v) {
                       return std::abs(wrap_angle(v.at(X(0))[state::kPsi] - target[state::kPsi])) > 3.1;
                     }});
  }
  cases.push_back({FactorTag::BearingRange,
                   std::make_shared<BearingRangeFactor>(X(0), L(0), BearingRangeMeas{-1.2, 0.9}, 0.01, 0.02),
                   [](std::mt19937_64& rng) {
                     Values v;
                     const StateVec x = random_state(rng);
                     const double a = uni(rng, -kPi, kPi);
                     const double r = uni(rng, 0.15, 2.5);
                     v.insert(X(0), x);
                     v.insert(L(0), Eigen::Vector2d(x[0] + r * std::cos(a), x[2] + r * std::sin(a)));
                     return v;
                   },
                   [](const Values& v) {
                     const Eigen::VectorXd& x = v.at(X(0));
                     const Eigen::VectorXd& l = v.at(L(0));
                     const double b = std::atan2(l[1] - x[2], l[0] - x[0]);
                     return std::abs(wrap_angle(b + 1.2)) > 3.1;
                   }});
  auto model = std::make_shared<const DiscreteModel>(make_planar_lti({12.0, 1.5}, 0.5).discrete);
  cases.push_back({FactorTag::Dynamics,
                   std::make_shared<DynamicsFactor>(X(1), X(0), U(0), model, NoiseModel::isotropic(6, 1e-3)),
                   [](std::mt19937_64& rng) {
                     Values v;
                     v.insert(X(0), random_state(rng));
                     v.insert(X(1), random_state(rng));
                     v.insert(U(0), Eigen::Vector3d(uni(rng, -3, 3), uni(rng, -3, 3), uni(rng, -1, 1)));
                     return v;
                   },
                   [model](const Values& v) {
                     const Eigen::VectorXd pred = model->Fx * v.at(X(0)) + model->Fu * v.at(U(0));
                     return std::abs(wrap_angle(v.at(X(1))[state::kPsi] - pred[state::kPsi])) > 3.1;
                   }});
  const ControlLimits lim = ControlLimits::planar_default();
  cases.push_back({FactorTag::ControlLimit,
                   std::make_shared<ControlLimitFactor>(U(0), lim, NoiseModel::isotropic(3, 1e-2)),
                   [](std::mt19937_64& rng) {
                     Values v;
                     v.insert(U(0), Eigen::Vector3d(uni(rng, -2.6, 2.6), uni(rng, -2.6, 2.6), uni(rng, -0.7, 0.7)));
                     return v;
                   },
                   [lim](const Values& v) {
                     const Eigen::VectorXd& u = v.at(U(0));
                     for (int j = 0; j < 3; ++j) {
                       if (std::abs(u[j] - lim.lower[j] - lim.threshold[j]) < 1e-5) return true;
                       if (std::abs(u[j] - lim.upper[j] + lim.threshold[j]) < 1e-5) return true;
                     }
                     return false;
                   }});
  const Circle c{Eigen::Vector2d(1.9, 2.1), 0.2};
  auto field = std::make_shared<const Sdf>(build_sdf(std::span(&c, 1), Workspace{}));
  SphereModel spheres;
  spheres.spheres = {Sphere{Eigen::Vector2d(0.15, 0.0), 0.2}, Sphere{Eigen::Vector2d(-0.1, 0.1), 0.25}};
  const double eps = 0.4;
  cases.push_back({FactorTag::Obstacle,
                   std::make_shared<ObstacleFactor>(X(0), field, spheres, eps, NoiseModel::isotropic(2, 0.05)),
                   [](std::mt19937_64& rng) {
                     Values v;
                     StateVec x = random_state(rng);
                     const double a = uni(rng, -kPi, kPi);
                     const double r = uni(rng, 0.25, 1.1);
                     x[state::kX] = 1.9 + r * std::cos(a);
                     x[state::kY] = 2.1 + r * std::sin(a);
                     v.insert(X(0), x);
                     return v;
                   },
                   [field, spheres, eps](const Values& v) {
                     // Hinge kink, and the cell boundaries of the bilinear field.
                     for (const PlacedSphere& s : robot_spheres(StateVec(v.at(X(0))), spheres)) {
                       if (std::abs(field->query(s.center).distance - s.radius - eps) < 1e-5) return true;
                       const Eigen::Vector2d g = (s.center - field->origin()) / field->cell();
                       for (int a = 0; a < 2; ++a) {
                         const double frac = g[a] - std::round(g[a]);
                         if (std::abs(frac) * field->cell() < 1e-5) return true;
                       }
                     }
                     return false;
                   }});
  {
    std::mt19937_64 gen(99);
    std::normal_distribution<double> gauss;
    const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(6, 6, [&] { return gauss(gen); });
    const Eigen::VectorXd b = Eigen::VectorXd::NullaryExpr(6, [&] { return gauss(gen); });
    StateVec ref;
    ref << 2.0, 0.0, 2.0, 0.0, -0.4, 0.0;
    cases.push_back({FactorTag::Condensed, std::make_shared<LinearStateFactor>(X(0), a, b, ref),
                     [](std::mt19937_64& rng) {
                       Values v;
                       v.insert(X(0), random_state(rng));
                       return v;
                     },
                     [ref](const Values& v) {
                       return std::abs(wrap_angle(v.at(X(0))[state::kPsi] - ref[state::kPsi])) > 3.1;
                     }});
  }
  return cases;
}

// Relative Frobenius error of the analytic Jacobian against central differences.
double fd_error(const Factor& f, const Values& at, double h) {
  std::vector<Eigen::MatrixXd> analytic;
  f.evaluate(at, &analytic);
  double worst = 0.0;
  for (std::size_t k = 0; k < f.keys().size(); ++k) {
    const Key key = f.keys()[k];
    const Eigen::VectorXd x0 = at.at(key);
    Eigen::MatrixXd num(f.dim(), x0.size());
    for (int c = 0; c < x0.size(); ++c) {
      Values p = at;
      Values m = at;
      Eigen::VectorXd xp = x0;
      Eigen::VectorXd xm = x0;
      xp[c] += h;
      xm[c] -= h;
      p.update(key, xp);
      m.update(key, xm);
      num.col(c) = (f.evaluate(p) - f.evaluate(m)) / (2 * h);
    }
    const double scale = num.norm();
    const double err = scale > 0.0 ? (analytic[k] - num).norm() / scale : analytic[k].norm();
    worst = std::max(worst, err);
  }
  return worst;
}

Outcome criterion_jacobians() {
  const auto t0 = Clock::now();
  Outcome out;
  const std::vector<Case> cases = jacobian_cases();
  for (FactorTag tag : kAllFactorTags) {
    if (std::none_of(cases.begin(), cases.end(), [&](const Case& c) { return c.tag == tag; })) {
      out.pass = false;
      out.detail += std::string("no case for ") + std::string(to_string(tag)) + "; ";
    }
  }
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int points = 0;
  for (const Case& c : cases) {
    int tested = 0;
    while (tested < 100) {
      const Values v = c.sample(rng);
      if (c.kink(v)) continue;
      const double e = fd_error(*c.factor, v, 1e-6);
      worst = std::max(worst, e);
      if (!(e < 1e-5)) {
        out.pass = false;
        out.detail += fmt("%s err %.2e; ", std::string(to_string(c.tag)).c_str(), e);
      }
      ++tested;
    }
    points += tested;
  }

  // Subgradients at the kinks.
  const ControlLimits lim = ControlLimits::planar_default();
  const HingeVector lo = control_limit_residual(lim.lower + lim.threshold, lim);
  const HingeVector hi = control_limit_residual(lim.upper - lim.threshold, lim);
  const bool limit_kink = (lo.slope.array() == -0.5).all() && (hi.slope.array() == 0.5).all() &&
                          lo.residual.isZero(0.0) && hi.residual.isZero(0.0);
  const HingeValue h = hinge_cost(0.4, 0.4);
  const bool obstacle_kink = h.slope == -0.5 && h.cost == 0.0;
  // Factor level: a field D = x - 1 puts a sphere exactly on the band edge.
  std::vector<double> data(81);
  for (int iy = 0; iy < 9; ++iy) {
    for (int ix = 0; ix < 9; ++ix) data[iy * 9 + ix] = 0.5 * ix - 1.0;
  }
  auto lin = std::make_shared<const Sdf>(Eigen::Vector2d::Zero(), 0.5, 9, 9, data);
  SphereModel one;
  one.spheres = {Sphere{Eigen::Vector2d::Zero(), 0.25}};
  ObstacleFactor of(X(0), lin, one, 0.5, NoiseModel::isotropic(1, 1.0));
  Values kv;
  kv.insert(X(0), (StateVec() << 1.75, 0, 1.125, 0, 0.3, 0).finished());
  std::vector<Eigen::MatrixXd> kj;
  const double kr = of.evaluate(kv, &kj)[0];
  const bool factor_kink = kr == 0.0 && kj[0](0, state::kX) == -0.5 && kj[0](0, state::kY) == 0.0;
  if (!limit_kink || !obstacle_kink || !factor_kink) {
    out.pass = false;
    out.detail += "kink subgradient mismatch; ";
  }
  const double secs = seconds_since(t0);
  if (secs >= 10.0) out.pass = false;
  out.detail += fmt("%zu factor types, %d points, worst rel err %.2e, kinks exact, %.2f s", cases.size(),
                    points, worst, secs);
  return out;
}

// ---------------------------------------------------------------------------
// 2. Dense oracle

Outcome criterion_dense_oracle() {
  const auto t0 = Clock::now();
  Outcome out;
  const double mass = 10.0;
  const double inertia = 1.0;
  const double dt = 1.0;
  const double s_fix = 1e-4;
  const double s_dyn = 1e-3;
  // Closed-form ZOH of three double integrators.
  Eigen::MatrixXd fx = Eigen::MatrixXd::Identity(6, 6);
  Eigen::MatrixXd fu = Eigen::MatrixXd::Zero(6, 3);
  const double g[3] = {1 / mass, 1 / mass, 1 / inertia};
  for (int a = 0; a < 3; ++a) {
    fx(2 * a, 2 * a + 1) = dt;
    fu(2 * a, a) = 0.5 * dt * dt * g[a];
    fu(2 * a + 1, a) = dt * g[a];
  }
  const ControlLimits lim = ControlLimits::planar_default();
  PlannerProblem p;
  p.params = {mass, inertia};
  p.dt = dt;
  auto model = std::make_shared<const DiscreteModel>(make_planar_lti(p.params, dt).discrete);

  for (int n : {2, 3, 5}) {
    StateVec start;
    start << 0.3, 0.0, 0.2, 0.0, 0.1, 0.0;
    StateVec goal;
    goal << 0.35, 0.0, 0.18, 0.0, 0.25, 0.0;
    FactorGraph graph;
    graph.add(PriorFactor::on_state(X(0), start, NoiseModel::isotropic(6, s_fix), FactorTag::Start));
    graph.add(PriorFactor::on_state(X(n), goal, NoiseModel::isotropic(6, s_fix), FactorTag::Goal));
    for (int i = 0; i < n; ++i) {
      graph.add(std::make_shared<DynamicsFactor>(X(i + 1), X(i), U(i), model, NoiseModel::isotropic(6, s_dyn)));
      graph.add(std::make_shared<ControlLimitFactor>(U(i), lim, NoiseModel::isotropic(3, 1e-2)));
    }
    Values init;
    for (int i = 0; i <= n; ++i) init.insert(X(i), StateVec::Zero());
    for (int i = 0; i < n; ++i) init.insert(U(i), Eigen::VectorXd::Zero(3));
    const LmResult lm = optimize_lm(graph, init);

    // Dense stacked least squares over z = [x_0..x_n, u_0..u_{n-1}], zero start.
    const int nx = 6 * (n + 1);
    const int cols = nx + 3 * n;
    const int rows = 12 + 6 * n;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    a.block(0, 0, 6, 6) = Eigen::MatrixXd::Identity(6, 6) / s_fix;
    b.segment(0, 6) = start / s_fix;
    a.block(6, 6 * n, 6, 6) = Eigen::MatrixXd::Identity(6, 6) / s_fix;
    b.segment(6, 6) = goal / s_fix;
    for (int i = 0; i < n; ++i) {
      const int r = 12 + 6 * i;
      a.block(r, 6 * (i + 1), 6, 6) = Eigen::MatrixXd::Identity(6, 6) / s_dyn;
      a.block(r, 6 * i, 6, 6) = -fx / s_dyn;
      a.block(r, nx + 3 * i, 6, 3) = -fu / s_dyn;
    }
    const Eigen::VectorXd z = a.completeOrthogonalDecomposition().solve(b);

    Eigen::VectorXd got(cols);
    bool inactive = true;
    for (int i = 0; i <= n; ++i) got.segment(6 * i, 6) = lm.values.at(X(i));
    for (int i = 0; i < n; ++i) {
      got.segment(nx + 3 * i, 3) = lm.values.at(U(i));
      if (!control_limit_residual(lm.values.at(U(i)), lim).residual.isZero(0.0)) inactive = false;
    }
    const double rel = (got - z).norm() / z.norm();
    const bool ok = inactive && rel < 1e-8 && lm.stats.iterations == 1 && lm.stats.converged;
    out.pass = out.pass && ok;
    out.detail += fmt("N=%d rel %.1e iters %d; ", n, rel, lm.stats.iterations);
  }
  const double secs = seconds_since(t0);
  if (secs >= 5.0) out.pass = false;
  out.detail += fmt("%.3f s", secs);
  return out;
}

// ---------------------------------------------------------------------------
// 3. Discretization

Outcome criterion_discretization() {
  Outcome out;
  double worst_closed = 0.0;
  for (double dt : {0.01, 0.1, 0.5, 1.0, 3.0}) {
    const double m = 10.0;
    const double iz = 1.0;
    const DiscreteModel d = make_planar_lti({m, iz}, dt).discrete;
    Eigen::MatrixXd fx = Eigen::MatrixXd::Identity(6, 6);
    Eigen::MatrixXd fu = Eigen::MatrixXd::Zero(6, 3);
    const double g[3] = {1 / m, 1 / m, 1 / iz};
    for (int a = 0; a < 3; ++a) {
      fx(2 * a, 2 * a + 1) = dt;
      fu(2 * a, a) = 0.5 * dt * dt * g[a];
      fu(2 * a + 1, a) = dt * g[a];
    }
    worst_closed = std::max({worst_closed, (d.Fx - fx).cwiseAbs().maxCoeff(), (d.Fu - fu).cwiseAbs().maxCoeff()});
  }
  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss;
  double worst_semi = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int n = 2 + k % 5;
    Eigen::MatrixXd a;
    if (k % 2 == 0) {
      // Stable: shift a random matrix left of its spectral abscissa.
      a = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return gauss(rng); });
      const double absc = a.eigenvalues().real().maxCoeff();
      a -= (absc + 0.5) * Eigen::MatrixXd::Identity(n, n);
    } else {
      // Nilpotent: strictly upper triangular, rotated by a random orthogonal.
      Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) u(i, j) = gauss(rng);
      }
      const Eigen::MatrixXd q =
          Eigen::MatrixXd::NullaryExpr(n, n, [&] { return gauss(rng); }).householderQr().householderQ();
      a = q * u * q.transpose();
    }
    const Eigen::MatrixXd b = Eigen::MatrixXd::NullaryExpr(n, 1, [&] { return gauss(rng); });
    const double dt = 0.2 + 0.1 * k;
    const Eigen::MatrixXd full = discretize_lti(a, b, dt).Fx;
    const Eigen::MatrixXd half = discretize_lti(a, b, 0.5 * dt).Fx;
    worst_semi = std::max(worst_semi, (half * half - full).cwiseAbs().maxCoeff() / std::max(1.0, full.cwiseAbs().maxCoeff()));
  }
  out.pass = worst_closed < 1e-12 && worst_semi < 1e-10;
  out.detail = fmt("closed form err %.1e, semigroup err %.1e over 20 matrices", worst_closed, worst_semi);
  return out;
}

// ---------------------------------------------------------------------------
// Scenario runs shared by 4-7 and 9-11.

struct Run {
  Scenario scenario;
  EpisodeLog log;
  double min_clearance = 0.0;
  double pos_err = 0.0;
  double att_err = 0.0;
  double tracking = 0.0;
  bool completed = false;
  double seconds = 0.0;
};

Run run(const Scenario& s) {
  Run r;
  r.scenario = s;
  const auto t0 = Clock::now();
  r.log = run_episode(s);
  r.seconds = seconds_since(t0);
  r.completed = r.log.status == EpisodeStatus::Completed;
  // Clearance, goal error and tracking recomputed from the raw ticks.
  r.min_clearance = std::numeric_limits<double>::infinity();
  double sq = 0.0;
  for (const TickRecord& t : r.log.ticks) {
    const Eigen::Vector2d l = obstacle_position(s.obstacle, t.t);
    const Eigen::Vector2d p(t.truth[state::kX], t.truth[state::kY]);
    r.min_clearance = std::min(r.min_clearance, (p - l).norm() - s.problem.obstacle_radius -
                                                    s.problem.spheres.spheres[0].radius);
    const StateVec ref = r.log.reference.state_at(t.t);
    sq += (p - Eigen::Vector2d(ref[state::kX], ref[state::kY])).squaredNorm();
  }
  r.tracking = std::sqrt(sq / static_cast<double>(r.log.ticks.size()));
  const StateVec& xf = r.log.ticks.back().truth;
  const StateVec& g = s.problem.x_goal;
  r.pos_err = std::hypot(xf[state::kX] - g[state::kX], xf[state::kY] - g[state::kY]);
  r.att_err = std::abs(wrap_angle(xf[state::kPsi] - g[state::kPsi]));
  return r;
}

bool reached(const Run& r) { return r.completed && r.pos_err < 0.1 && r.att_err < 5.0 * kPi / 180.0; }

Outcome criterion_static(const Run& r) {
  Outcome out;
  out.pass = r.completed && r.min_clearance > 0.0 && r.pos_err < 0.1 && r.att_err < 5.0 * kPi / 180.0 &&
             r.seconds < 30.0;
  out.detail = fmt("min clearance %.3f m, goal error %.4f m / %.2f deg, %.2f s", r.min_clearance, r.pos_err,
                   r.att_err * 180.0 / kPi, r.seconds);
  return out;
}

Outcome criterion_reactive(const std::vector<Run>& runs) {
  int free = 0;
  int goal = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (const Run& r : runs) {
    if (r.completed && r.min_clearance > 0.0) ++free;
    if (reached(r)) ++goal;
    worst = std::min(worst, r.min_clearance);
  }
  Outcome out;
  out.pass = free == kSeeds && goal >= 8;
  out.detail = fmt("collision-free %d/10, goal reached %d/10, worst clearance %.3f m", free, goal, worst);
  return out;
}

Outcome criterion_predictive(const std::vector<Run>& reactive, const std::vector<Run>& predictive) {
  int free = 0;
  int lower = 0;
  std::string pairs;
  for (int k = 0; k < kSeeds; ++k) {
    const Run& p = predictive[static_cast<std::size_t>(k)];
    const Run& r = reactive[static_cast<std::size_t>(k)];
    if (p.completed && p.min_clearance > 0.0) ++free;
    if (p.tracking < r.tracking) ++lower;
    pairs += fmt("%s%.3f/%.3f", k ? " " : "", p.tracking, r.tracking);
  }
  Outcome out;
  out.pass = free == kSeeds && lower >= 8;
  out.detail = fmt("collision-free %d/10, lower tracking rmse %d/10 (pred/react m: %s)", free, lower, pairs.c_str());
  return out;
}

Outcome criterion_estimation(const std::vector<Run>& predictive) {
  Outcome out;
  double worst_l = 0.0;
  double worst_ratio = 0.0;
  for (const Run& r : predictive) {
    const double range_sigma = r.scenario.sensor.range;
    const StateVec& sx = r.scenario.sensor.state;
    const Values& v = r.log.final_solution.values;
    double l_sq = 0.0;
    StateVec x_sq = StateVec::Zero();
    int n = 0;
    for (const StepRecord& s : r.log.steps) {
      const int i = s.report.index;
      l_sq += (Eigen::Vector2d(v.at(L(i))) - s.obstacle_truth).squaredNorm();
      StateVec d = StateVec(v.at(X(i))) - s.truth;
      d[state::kPsi] = wrap_angle(d[state::kPsi]);
      x_sq += d.cwiseAbs2();
      ++n;
    }
    const double l_rmse = std::sqrt(l_sq / n);
    const StateVec x_rmse = (x_sq / n).cwiseSqrt();
    worst_l = std::max(worst_l, l_rmse / range_sigma);
    worst_ratio = std::max(worst_ratio, (x_rmse.array() / sx.array()).maxCoeff());
    if (!(l_rmse < 3.0 * range_sigma) || !((x_rmse.array() < 3.0 * sx.array()).all()) || n != 61) {
      out.pass = false;
    }
  }
  out.detail = fmt("over 10 seeds: obstacle rmse up to %.2f sigma_range, state rmse up to %.2f sigma_x (limit 3)",
                   worst_l, worst_ratio);
  return out;
}

// ---------------------------------------------------------------------------
// 8. Structure of the online edits.

Outcome criterion_structure() {
  Outcome out;
  int checked = 0;
  for (const char* file : {"moving_reactive.yaml", "moving_predictive.yaml"}) {
    const Scenario s = load(file);
    Planner planner(prepare_problem(s));
    const FactorTable table = planner.table();
    const int n = s.problem.horizon;
    Rng rng(s.seed);
    for (int i = 0; i <= n; ++i) {
      const StateVec x = planner.solution().values.at(X(i));
      const MeasurementBundle m = sample_measurements(x, obstacle_position(s.obstacle, i * s.problem.dt), s.sensor, rng, i);
      const StepReport r = planner.step(m);
      const FactorGraph& g = planner.graph();
      const int want = s.problem.mode == PlanningMode::Reactive ? n - i : 0;
      bool ok = r.obstacle_replacements == want;
      ok = ok && !g.contains(table.obstacles[static_cast<std::size_t>(i)]);
      if (i < n) ok = ok && !g.contains(table.limits[static_cast<std::size_t>(i)]);
      ok = ok && r.removed_start == (i == 0) && r.removed_goal == (i == n);
      ok = ok && !g.contains(table.start) && g.contains(table.goal) == (i < n);
      // No limit or obstacle factor on any executed step survives.
      for (const auto& [id, f] : g.factors()) {
        if ((f->tag() == FactorTag::ControlLimit || f->tag() == FactorTag::Obstacle) && f->keys()[0].index <= i) {
          ok = false;
        }
      }
      if (!ok) {
        out.pass = false;
        out.detail += fmt("%s step %d wrong; ", to_string(s.problem.mode).data(), i);
      }
      ++checked;
    }
  }
  out.detail += fmt("%d steps checked in both modes", checked);
  return out;
}

// ---------------------------------------------------------------------------
// 9. Step time trend.

Outcome criterion_complexity(const std::vector<Run>& reactive, const std::vector<Run>& predictive) {
  Outcome out;
  int ok = 0;
  int total = 0;
  for (const auto* set : {&reactive, &predictive}) {
    for (int k = 0; k < 5; ++k) {
      const EpisodeLog& log = (*set)[static_cast<std::size_t>(k)].log;
      std::vector<double> ms;
      for (const StepRecord& s : log.steps) ms.push_back(s.report.wall_ms);
      if (ms.size() < 20) {
        out.pass = false;
        continue;
      }
      const double first = median(std::vector<double>(ms.begin(), ms.begin() + 10));
      const double last = median(std::vector<double>(ms.end() - 10, ms.end()));
      ++total;
      if (last < first) ++ok;
      out.detail += fmt("%.2f->%.2f ", first, last);
    }
  }
  out.pass = out.pass && ok == total && total == 10;
  out.detail = fmt("last-10 median below first-10 median in %d/%d episodes (ms: %s)", ok, total, out.detail.c_str());
  return out;
}

// ---------------------------------------------------------------------------
// 10. Planned controls within limits.

Outcome criterion_limits(const std::vector<const Run*>& runs) {
  long entries = 0;
  long beyond = 0;
  long beyond2 = 0;
  double worst = 0.0;
  long anchor_entries = 0;
  long anchor_beyond = 0;
  double anchor_worst = 0.0;
  for (const Run* r : runs) {
    const ControlLimits& l = r->scenario.problem.limits;
    std::vector<const PlanSnapshot*> plans{&r->log.reference};
    for (const PlanSnapshot& p : r->log.plans) plans.push_back(&p);
    for (const PlanSnapshot* p : plans) {
      for (std::size_t k = 0; k < p->controls.size(); ++k) {
        const ControlVec& u = p->controls[k];
        // Excess over the hard limit in units of the threshold.
        const Eigen::ArrayXd over = ((u - l.upper).cwiseMax(l.lower - u).cwiseMax(0.0)).array() / l.threshold.array();
        const double m = over.maxCoeff();
        // After step i the control u_i is being executed and carries no limit factor.
        const bool executing = p != &r->log.reference && k == 0;
        if (executing) {
          ++anchor_entries;
          if (m > 1.0) ++anchor_beyond;
          anchor_worst = std::max(anchor_worst, m);
          continue;
        }
        ++entries;
        if (m > 1.0) ++beyond;
        if (m > 2.0) ++beyond2;
        worst = std::max(worst, m);
      }
    }
  }
  Outcome out;
  const double frac = static_cast<double>(beyond) / static_cast<double>(entries);
  out.pass = frac < 0.01 && beyond2 == 0;
  out.detail = fmt("planned u_k, k > i: %ld entries, %.3f%% beyond u_ths, %ld beyond 2 u_ths, worst %.2f u_ths; "
                   "executing u_i (no limit factor): %ld of %ld beyond u_ths, worst %.2f u_ths",
                   entries, 100.0 * frac, beyond2, worst, anchor_beyond, anchor_entries, anchor_worst);
  return out;
}

// ---------------------------------------------------------------------------
// 11. Determinism.

Outcome criterion_determinism(const Run& st, const Run& re, const Run& pr) {
  Outcome out;
  int same = 0;
  for (const Run* r : {&st, &re, &pr}) {
    const EpisodeLog again = run_episode(r->scenario);
    const std::string a = csv_of(r->log);
    if (a == csv_of(again) && a.size() > 1000) ++same;
  }
  out.pass = same == 3;
  out.detail = fmt("%d/3 scenarios reproduce byte-identical CSV", same);
  return out;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* what, const Outcome& o) {
    std::printf("%s %2d %-28s %s\n", o.pass ? "PASS" : "FAIL", id, what, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };

  report(1, "jacobians", criterion_jacobians());
  report(2, "dense oracle", criterion_dense_oracle());
  report(3, "discretization", criterion_discretization());

  const Run st = run(load("static.yaml"));
  report(4, "static obstacle", criterion_static(st));

  std::vector<Run> reactive;
  std::vector<Run> predictive;
  const Scenario base_r = load("moving_reactive.yaml");
  const Scenario base_p = load("moving_predictive.yaml");
  for (int k = 0; k < kSeeds; ++k) {
    Scenario r = base_r;
    Scenario p = base_p;
    r.seed = p.seed = base_r.seed + static_cast<std::uint64_t>(k);
    reactive.push_back(run(r));
    predictive.push_back(run(p));
  }
  report(5, "reactive moving obstacle", criterion_reactive(reactive));
  report(6, "predictive moving obstacle", criterion_predictive(reactive, predictive));
  report(7, "estimation quality", criterion_estimation(predictive));
  report(8, "online edit structure", criterion_structure());
  report(9, "step time trend", criterion_complexity(reactive, predictive));

  std::vector<const Run*> all{&st};
  for (const Run& r : reactive) all.push_back(&r);
  for (const Run& r : predictive) all.push_back(&r);
  report(10, "control limits", criterion_limits(all));
  report(11, "determinism", criterion_determinism(st, reactive[0], predictive[0]));

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
