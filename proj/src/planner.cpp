#include "scate/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

namespace scate {

std::string_view to_string(PlanningMode mode) {
  return mode == PlanningMode::Reactive ? "reactive" : "predictive";
}

std::optional<PlanningMode> parse_mode(std::string_view text) {
  if (text == "reactive") return PlanningMode::Reactive;
  if (text == "predictive") return PlanningMode::Predictive;
  return std::nullopt;
}

void PlannerProblem::validate() const {
  if (horizon < 2) throw std::invalid_argument("horizon must be at least 2");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(params.mass > 0.0) || !(params.inertia > 0.0)) {
    throw std::invalid_argument("mass and inertia must be positive");
  }
  if (!x_start.allFinite() || !x_goal.allFinite()) throw std::invalid_argument("non-finite endpoint");
  for (double s : {noise.fix, noise.dyn, noise.lim, noise.obs, noise.bearing, noise.range}) {
    if (!(s > 0.0)) throw std::invalid_argument("noise sigmas must be positive");
  }
  if (!(noise.meas_x.array() > 0.0).all()) throw std::invalid_argument("noise sigmas must be positive");
  limits.validate();
  if (limits.lower.size() != kControlDim) throw std::invalid_argument("limits must be 3-dimensional");
  if (spheres.spheres.empty()) throw std::invalid_argument("sphere model needs at least one sphere");
  for (const Sphere& s : spheres.spheres) {
    if (!(s.radius > 0.0)) throw std::invalid_argument("sphere radii must be positive");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (!(obstacle_radius >= 0.0)) throw std::invalid_argument("obstacle radius must be >= 0");
  if (mode == PlanningMode::Predictive) {
    if (static_cast<int>(predicted.fields.size()) != horizon + 1) {
      throw std::invalid_argument("predictive mode needs horizon + 1 fields");
    }
    for (const SdfPtr& f : predicted.fields) {
      if (!f) throw std::invalid_argument("null predicted field");
    }
  }
}

Values initial_guess(const PlannerProblem& problem) {
  Values v;
  const int n = problem.horizon;
  const double dpsi = wrap_angle(problem.x_goal[state::kPsi] - problem.x_start[state::kPsi]);
  for (int i = 0; i <= n; ++i) {
    const double s = static_cast<double>(i) / n;
    StateVec x = (1.0 - s) * problem.x_start + s * problem.x_goal;
    x[state::kPsi] = wrap_angle(problem.x_start[state::kPsi] + s * dpsi);
    v.insert(X(i), x);
  }
  for (int i = 0; i < n; ++i) v.insert(U(i), Eigen::VectorXd::Zero(kControlDim));
  return v;
}

namespace {

NoiseModel obstacle_noise(const PlannerProblem& p) {
  return NoiseModel::isotropic(static_cast<int>(p.spheres.spheres.size()), p.noise.obs);
}

FactorPtr make_obstacle(const PlannerProblem& p, int k, SdfPtr field) {
  return std::make_shared<ObstacleFactor>(X(k), std::move(field), p.spheres, p.eps, obstacle_noise(p));
}

}  // namespace

SdfPtr reactive_field(const PlannerProblem& problem, const Eigen::Vector2d& obstacle) {
  const Circle c{obstacle, problem.obstacle_radius};
  return std::make_shared<const Sdf>(build_sdf(std::span(&c, 1), problem.workspace, problem.sdf));
}

InitialGraph build_initial_graph(const PlannerProblem& problem) {
  problem.validate();
  const int n = problem.horizon;
  auto model = std::make_shared<const DiscreteModel>(make_planar_lti(problem.params, problem.dt).discrete);
  const NoiseModel fix = NoiseModel::isotropic(kStateDim, problem.noise.fix);
  const NoiseModel dyn = NoiseModel::isotropic(kStateDim, problem.noise.dyn);
  const NoiseModel lim = NoiseModel::isotropic(kControlDim, problem.noise.lim);

  SdfPtr empty;
  if (problem.mode == PlanningMode::Reactive) {
    empty = std::make_shared<const Sdf>(build_sdf({}, problem.workspace, problem.sdf));
  }

  InitialGraph out;
  FactorGraph& g = out.graph;
  FactorTable& t = out.table;
  t.start = g.add(PriorFactor::on_state(X(0), problem.x_start, fix, FactorTag::Start));
  t.goal = g.add(PriorFactor::on_state(X(n), problem.x_goal, fix, FactorTag::Goal));
  for (int i = 0; i < n; ++i) {
    t.dynamics.push_back(g.add(std::make_shared<DynamicsFactor>(X(i + 1), X(i), U(i), model, dyn)));
    t.limits.push_back(g.add(std::make_shared<ControlLimitFactor>(U(i), problem.limits, lim)));
  }
  for (int i = 0; i <= n; ++i) {
    SdfPtr field = problem.mode == PlanningMode::Reactive
                       ? empty
                       : problem.predicted.fields[static_cast<std::size_t>(i)];
    t.obstacles.push_back(g.add(make_obstacle(problem, i, std::move(field))));
  }
  return out;
}

Planner::Planner(PlannerProblem problem)
    : problem_(std::move(problem)), condensing_(problem_.condense_past) {
  InitialGraph init = build_initial_graph(problem_);
  graph_ = std::move(init.graph);
  table_ = std::move(init.table);

  LmResult r = optimize_lm(graph_, initial_guess(problem_), problem_.lm);
  solution_.values = std::move(r.values);
  solution_.stats = r.stats;
  solution_.split_index = -1;
  solution_.horizon = problem_.horizon;
  solution_.dt = problem_.dt;
}

StepReport Planner::step(const MeasurementBundle& meas) {
  const auto t0 = std::chrono::steady_clock::now();
  const int i = next_index();
  const int n = problem_.horizon;
  if (done()) throw std::logic_error("episode already complete");
  if (meas.index != i) {
    throw std::invalid_argument("measurement for step " + std::to_string(meas.index) +
                                ", expected " + std::to_string(i));
  }
  if (meas.z_l.range < 0.0) throw std::invalid_argument("negative range measurement");

  StepReport report;
  report.index = i;

  // Measurement factors.
  std::vector<FactorEdit> edits;
  edits.push_back(AddFactor{PriorFactor::on_state(
      X(i), meas.z_x, NoiseModel::from_sigmas(problem_.noise.meas_x), FactorTag::StateMeasurement)});
  edits.push_back(AddFactor{std::make_shared<BearingRangeFactor>(
      X(i), L(i), meas.z_l, problem_.noise.bearing, problem_.noise.range)});
  report.added = 2;

  // Obstacle location enters the solution.
  const Eigen::Vector2d l_meas = back_project(meas.z_x, meas.z_l);
  report.obstacle_meas = l_meas;

  // Outdated factors.
  if (i == 0) {
    edits.push_back(RemoveFactor{table_.start});
    report.removed_start = true;
  }
  if (i == n) {
    edits.push_back(RemoveFactor{table_.goal});
    report.removed_goal = true;
  }
  if (i < n) edits.push_back(RemoveFactor{table_.limits[static_cast<std::size_t>(i)]});
  edits.push_back(RemoveFactor{table_.obstacles[static_cast<std::size_t>(i)]});
  report.removed = static_cast<int>(edits.size()) - report.added;

  // Future obstacle costs follow the latest measurement.
  if (problem_.mode == PlanningMode::Reactive && i < n) {
    SdfPtr field = reactive_field(problem_, l_meas);
    for (int k = i + 1; k <= n; ++k) {
      edits.push_back(ReplaceFactor{table_.obstacles[static_cast<std::size_t>(k)],
                                    make_obstacle(problem_, k, field)});
      ++report.obstacle_replacements;
    }
  }

  const std::vector<FactorId> added = graph_.apply(edits);
  table_.state_meas.push_back(added[0]);
  table_.bearing_range.push_back(added[1]);
  z_l_.push_back(meas.z_l);

  Values warm = solution_.values;
  warm.insert_or_assign(L(i), l_meas);
  solution_.split_index = i;

  try {
    if (condensing_ && i > 0) condensing_ = condense(i - 1, warm);
    LmResult r = condensing_ ? optimize_lm(active_graph(i), warm, problem_.lm)
                             : optimize_lm(graph_, warm, problem_.lm);
    if (condensing_) {
      recover_past(r.values, i);
      r.stats.initial_error = total_error(graph_, warm);
      r.stats.final_error = total_error(graph_, r.values);
    }
    report.stats = r.stats;
    if (r.stats.converged) {
      solution_.values = std::move(r.values);
      solution_.stats = r.stats;
    } else {
      report.flagged = true;
      report.failure = "optimizer did not converge";
      solution_.values = std::move(warm);
    }
  } catch (const std::exception& e) {
    report.flagged = true;
    report.failure = e.what();
    solution_.values = std::move(warm);
  }

  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

bool Planner::condense(int k, const Values& values) {
  // Only the summary, the measurement prior and one dynamics factor may touch
  // the step being folded; anything else keeps the full solve.
  const std::size_t expected_x = (k > 0 ? 2 : 1) + 2;
  if (graph_.degree(X(k)) != expected_x || graph_.degree(U(k)) != 1) return false;

  constexpr int kA = kStateDim + kControlDim;
  constexpr int kCols = kA + kStateDim + 1;
  std::vector<FactorPtr> factors;
  if (summary_) factors.push_back(summary_);
  factors.push_back(graph_.get(table_.state_meas[static_cast<std::size_t>(k)]));
  factors.push_back(graph_.get(table_.dynamics[static_cast<std::size_t>(k)]));

  int rows = 0;
  for (const FactorPtr& f : factors) rows += f->dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, kCols);
  int row = 0;
  std::vector<Eigen::MatrixXd> jac;
  for (const FactorPtr& f : factors) {
    const Eigen::VectorXd r = f->evaluate(values, &jac);
    const int d = f->dim();
    for (std::size_t j = 0; j < f->keys().size(); ++j) {
      const Key& key = f->keys()[j];
      const int col = key == X(k) ? 0 : key == U(k) ? kStateDim : kA;
      m.block(row, col, d, jac[j].cols()) = f->noise().whiten(jac[j]);
    }
    m.block(row, kCols - 1, d, 1) = f->noise().whiten(r);
    row += d;
  }

  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  const Eigen::VectorXd diag = r.diagonal().head(kA).cwiseAbs();
  if (rows < kA || !(diag.minCoeff() > 1e-12 * diag.maxCoeff())) return false;

  const auto r11 = r.topLeftCorner(kA, kA).triangularView<Eigen::Upper>();
  PastConditional c;
  c.gain = -r11.solve(r.block(0, kA, kA, kStateDim));
  c.offset = -r11.solve(r.block(0, kCols - 1, kA, 1));
  c.ref_x = values.at(X(k));
  c.ref_u = values.at(U(k));
  c.ref_next = values.at(X(k + 1));
  past_.push_back(c);

  const int left = std::min(rows, kCols - 1) - kA;
  if (left > 0) {
    summary_ = std::make_shared<LinearStateFactor>(X(k + 1), r.block(kA, kA, left, kStateDim),
                                                   r.block(kA, kCols - 1, left, 1), c.ref_next);
  } else {
    summary_.reset();
  }
  return true;
}

FactorGraph Planner::active_graph(int i) const {
  FactorGraph g;
  for (const auto& [id, f] : graph_.factors()) {
    const bool active = std::all_of(f->keys().begin(), f->keys().end(), [i](const Key& key) {
      return key.kind != VarKind::Obstacle && key.index >= i;
    });
    if (active) g.add(f);
  }
  if (summary_) g.add(summary_);
  return g;
}

void Planner::recover_past(Values& values, int i) const {
  for (int k = i - 1; k >= 0; --k) {
    const PastConditional& c = past_[static_cast<std::size_t>(k)];
    const Eigen::Matrix<double, kStateDim + kControlDim, 1> a =
        c.offset + c.gain * state_difference(values.at(X(k + 1)), c.ref_next);
    values.update(X(k), c.ref_x + a.head<kStateDim>());
    values.update(U(k), c.ref_u + a.tail<kControlDim>());
  }
  // Each obstacle variable is pinned by its own measurement alone.
  for (int k = 0; k <= i; ++k) {
    values.insert_or_assign(L(k), back_project(values.at(X(k)), z_l_[static_cast<std::size_t>(k)]));
  }
}

// --- plan snapshots ---------------------------------------------------------

PlanSnapshot extract_plan(const MapSolution& solution) {
  const int n = solution.horizon;
  const int i = std::max(solution.split_index, 0);
  if (solution.split_index >= n) throw std::logic_error("episode complete: no plan remains");
  PlanSnapshot plan;
  plan.start_index = i;
  plan.dt = solution.dt;
  plan.anchor = solution.values.at(X(i));
  for (int k = i + 1; k <= n; ++k) plan.states.emplace_back(solution.values.at(X(k)));
  for (int k = i; k < n; ++k) plan.controls.emplace_back(solution.values.at(U(k)));
  return plan;
}

StateVec PlanSnapshot::state_at(double t) const {
  if (states.empty()) return anchor;
  const double s = (t - start_time()) / dt;
  if (s <= 0.0) return anchor;
  const int last = static_cast<int>(states.size());
  if (s >= last) return states.back();
  const int k = static_cast<int>(std::floor(s));
  const double f = s - k;
  const StateVec& a = k == 0 ? anchor : states[static_cast<std::size_t>(k - 1)];
  const StateVec& b = states[static_cast<std::size_t>(k)];
  StateVec x = (1.0 - f) * a + f * b;
  x[state::kPsi] = wrap_angle(a[state::kPsi] + f * wrap_angle(b[state::kPsi] - a[state::kPsi]));
  return x;
}

ControlVec PlanSnapshot::control_at(double t) const {
  const double s = (t - start_time()) / dt;
  const int last = static_cast<int>(controls.size());
  if (last == 0 || s >= last) return ControlVec::Zero();
  const int k = std::max(0, static_cast<int>(std::floor(s)));
  return controls[static_cast<std::size_t>(k)];
}

void to_json(nlohmann::json& j, const PlanSnapshot& plan) {
  auto vec = [](const auto& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  j = nlohmann::json{{"start_index", plan.start_index}, {"dt", plan.dt}, {"anchor", vec(plan.anchor)}};
  j["states"] = nlohmann::json::array();
  for (const StateVec& x : plan.states) j["states"].push_back(vec(x));
  j["controls"] = nlohmann::json::array();
  for (const ControlVec& u : plan.controls) j["controls"].push_back(vec(u));
}

void from_json(const nlohmann::json& j, PlanSnapshot& plan) {
  auto read = [](const nlohmann::json& a, auto& out) {
    const auto v = a.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != out.size()) {
      throw std::invalid_argument("plan vector has wrong dimension");
    }
    for (std::size_t k = 0; k < v.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[k];
  };
  plan.start_index = j.at("start_index").get<int>();
  plan.dt = j.at("dt").get<double>();
  read(j.at("anchor"), plan.anchor);
  plan.states.clear();
  for (const auto& s : j.at("states")) {
    StateVec x;
    read(s, x);
    plan.states.push_back(x);
  }
  plan.controls.clear();
  for (const auto& c : j.at("controls")) {
    ControlVec u;
    read(c, u);
    plan.controls.push_back(u);
  }
}

}  // namespace scate
