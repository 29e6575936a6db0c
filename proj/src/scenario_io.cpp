#include "scate/scenario_io.hpp"

#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace scate {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
  if (!node.IsMap()) throw ScenarioError(where + " must be a mapping", line_of(node));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ScenarioError("unknown key '" + key + "' in " + where, line_of(kv.first));
    }
  }
}

template <typename T>
T read(const YAML::Node& n, const std::string& what) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ScenarioError("cannot read " + what, line_of(n));
  }
}

template <typename T>
void get(const YAML::Node& parent, const char* key, T& out, const std::string& where) {
  if (const YAML::Node n = parent[key]) out = read<T>(n, where + "." + key);
}

Eigen::VectorXd read_vector(const YAML::Node& n, int dim, const std::string& what) {
  if (!n.IsSequence() || static_cast<int>(n.size()) != dim) {
    throw ScenarioError(what + " must be a list of " + std::to_string(dim) + " numbers", line_of(n));
  }
  Eigen::VectorXd v(dim);
  for (int k = 0; k < dim; ++k) v[k] = read<double>(n[k], what);
  return v;
}

/// [x, vx, y, vy, psi, omega], or [x, y, psi] for a state at rest.
StateVec read_state(const YAML::Node& n, const std::string& what) {
  if (n.IsSequence() && n.size() == 3) {
    const Eigen::VectorXd p = read_vector(n, 3, what);
    StateVec x = StateVec::Zero();
    x[state::kX] = p[0];
    x[state::kY] = p[1];
    x[state::kPsi] = p[2];
    return x;
  }
  return read_vector(n, kStateDim, what);
}

Eigen::Vector2d read_point(const YAML::Node& n, const std::string& what) {
  return read_vector(n, 2, what);
}

void parse_noise(const YAML::Node& n, PlannerNoise& noise) {
  check_keys(n, {"fix", "dyn", "lim", "obs", "state", "bearing", "bearing_deg", "range"}, "noise");
  if (n["bearing"] && n["bearing_deg"]) throw ScenarioError("give noise.bearing or noise.bearing_deg, not both", line_of(n));
  get(n, "fix", noise.fix, "noise");
  get(n, "dyn", noise.dyn, "noise");
  get(n, "lim", noise.lim, "noise");
  get(n, "obs", noise.obs, "noise");
  if (n["state"]) noise.meas_x = read_vector(n["state"], kStateDim, "noise.state");
  get(n, "bearing", noise.bearing, "noise");
  if (n["bearing_deg"]) noise.bearing = read<double>(n["bearing_deg"], "noise.bearing_deg") * kDeg;
  get(n, "range", noise.range, "noise");
}

void parse_sensor(const YAML::Node& n, SensorNoise& s) {
  check_keys(n, {"state", "bearing", "bearing_deg", "range"}, "sensor");
  if (n["bearing"] && n["bearing_deg"]) throw ScenarioError("give sensor.bearing or sensor.bearing_deg, not both", line_of(n));
  if (n["state"]) s.state = read_vector(n["state"], kStateDim, "sensor.state");
  get(n, "bearing", s.bearing, "sensor");
  if (n["bearing_deg"]) s.bearing = read<double>(n["bearing_deg"], "sensor.bearing_deg") * kDeg;
  get(n, "range", s.range, "sensor");
}

void parse_robot(const YAML::Node& n, PlannerProblem& p) {
  check_keys(n, {"mass", "inertia", "spheres"}, "robot");
  get(n, "mass", p.params.mass, "robot");
  get(n, "inertia", p.params.inertia, "robot");
  if (const YAML::Node s = n["spheres"]) {
    if (!s.IsSequence() || s.size() == 0) throw ScenarioError("robot.spheres must be a nonempty list", line_of(s));
    p.spheres.spheres.clear();
    for (const auto& e : s) {
      check_keys(e, {"offset", "radius"}, "robot.spheres entry");
      Sphere sp;
      if (e["offset"]) sp.offset = read_point(e["offset"], "sphere offset");
      get(e, "radius", sp.radius, "robot.spheres");
      p.spheres.spheres.push_back(sp);
    }
  }
}

void parse_limits(const YAML::Node& n, ControlLimits& lim) {
  check_keys(n, {"lower", "upper", "threshold"}, "limits");
  if (n["lower"]) lim.lower = read_vector(n["lower"], kControlDim, "limits.lower");
  if (n["upper"]) lim.upper = read_vector(n["upper"], kControlDim, "limits.upper");
  if (n["threshold"]) lim.threshold = read_vector(n["threshold"], kControlDim, "limits.threshold");
}

void parse_obstacle(const YAML::Node& n, Scenario& s) {
  check_keys(n, {"radius", "waypoints"}, "obstacle");
  get(n, "radius", s.problem.obstacle_radius, "obstacle");
  if (const YAML::Node w = n["waypoints"]) {
    if (!w.IsSequence() || w.size() == 0) {
      throw ScenarioError("obstacle.waypoints must be a nonempty list", line_of(w));
    }
    s.obstacle.waypoints.clear();
    for (const auto& e : w) {
      check_keys(e, {"t", "position"}, "obstacle waypoint");
      if (!e["t"] || !e["position"]) throw ScenarioError("waypoint needs t and position", line_of(e));
      s.obstacle.waypoints.push_back({read<double>(e["t"], "waypoint t"), read_point(e["position"], "waypoint position")});
    }
  }
}

void parse_gain(const YAML::Node& n, GainSpec& gain) {
  check_keys(n, {"poles", "lqr"}, "gain");
  if (n["poles"] && n["lqr"]) throw ScenarioError("gain takes either poles or lqr", line_of(n));
  if (const YAML::Node p = n["poles"]) {
    if (!p.IsSequence() || p.size() != kControlDim) {
      throw ScenarioError("gain.poles must list one pole pair per control axis", line_of(p));
    }
    AxisPoles poles;
    for (const auto& e : p) {
      const Eigen::VectorXd v = read_vector(e, 2, "pole pair");
      poles.poles.push_back({v[0], v[1]});
    }
    gain = poles;
  } else if (const YAML::Node q = n["lqr"]) {
    check_keys(q, {"q", "r"}, "gain.lqr");
    if (!q["q"] || !q["r"]) throw ScenarioError("gain.lqr needs q and r diagonals", line_of(q));
    QuadraticWeights w;
    w.Q = read_vector(q["q"], kStateDim, "gain.lqr.q").asDiagonal();
    w.R = read_vector(q["r"], kControlDim, "gain.lqr.r").asDiagonal();
    gain = w;
  }
}

void parse_optimizer(const YAML::Node& n, PlannerProblem& p) {
  LmConfig& lm = p.lm;
  check_keys(n, {"max_iters", "lambda_init", "lambda_scale", "lambda_min", "lambda_max", "abs_tol",
                 "rel_tol", "damping", "ordering", "solver", "refine", "condense_past"},
             "optimizer");
  get(n, "max_iters", lm.max_iters, "optimizer");
  get(n, "lambda_init", lm.lambda_init, "optimizer");
  get(n, "lambda_scale", lm.lambda_scale, "optimizer");
  get(n, "lambda_min", lm.lambda_min, "optimizer");
  get(n, "lambda_max", lm.lambda_max, "optimizer");
  get(n, "abs_tol", lm.abs_tol, "optimizer");
  get(n, "rel_tol", lm.rel_tol, "optimizer");
  get(n, "refine", lm.refine_passes, "optimizer");
  get(n, "condense_past", p.condense_past, "optimizer");
  if (const YAML::Node d = n["solver"]) {
    const auto v = read<std::string>(d, "optimizer.solver");
    if (v == "row_space") lm.solver = LinearSolver::RowSpace;
    else if (v == "qr") lm.solver = LinearSolver::QR;
    else if (v == "cholesky") lm.solver = LinearSolver::Cholesky;
    else throw ScenarioError("optimizer.solver must be row_space, qr or cholesky", line_of(d));
  }
  if (const YAML::Node d = n["damping"]) {
    const auto v = read<std::string>(d, "optimizer.damping");
    if (v == "isotropic") lm.damping = DampingMode::Isotropic;
    else if (v == "marquardt") lm.damping = DampingMode::Marquardt;
    else throw ScenarioError("optimizer.damping must be isotropic or marquardt", line_of(d));
  }
  if (const YAML::Node o = n["ordering"]) {
    const auto v = read<std::string>(o, "optimizer.ordering");
    if (v == "minimum_degree") lm.ordering = OrderingMethod::MinimumDegree;
    else if (v == "natural") lm.ordering = OrderingMethod::Natural;
    else throw ScenarioError("optimizer.ordering must be minimum_degree or natural", line_of(o));
  }
  if (lm.max_iters < 1 || !(lm.lambda_init > 0.0) || !(lm.lambda_scale > 1.0) ||
      !(lm.lambda_min > 0.0) || !(lm.lambda_max > lm.lambda_min) || !(lm.abs_tol >= 0.0) ||
      !(lm.rel_tol >= 0.0) || lm.refine_passes < 0) {
    throw ScenarioError("invalid optimizer settings", line_of(n));
  }
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(e.msg, e.mark.line + 1);
  }
  if (!root || root.IsNull()) throw ScenarioError("empty scenario", 0);
  check_keys(root,
             {"name", "mode", "seed", "horizon", "dt", "duration", "workspace", "start", "goal",
              "rates", "robot", "limits", "noise", "sensor", "obstacle", "field", "gain", "plant",
              "optimizer"},
             "scenario");

  Scenario s;
  PlannerProblem& p = s.problem;
  get(root, "name", s.name, "scenario");
  if (const YAML::Node m = root["mode"]) {
    const auto mode = parse_mode(read<std::string>(m, "mode"));
    if (!mode) throw ScenarioError("mode must be reactive or predictive", line_of(m));
    p.mode = *mode;
  }
  get(root, "seed", s.seed, "scenario");
  get(root, "horizon", p.horizon, "scenario");
  get(root, "dt", p.dt, "scenario");
  get(root, "duration", s.duration, "scenario");

  if (const YAML::Node w = root["workspace"]) {
    check_keys(w, {"min", "max"}, "workspace");
    if (w["min"]) p.workspace.min = read_point(w["min"], "workspace.min");
    if (w["max"]) p.workspace.max = read_point(w["max"], "workspace.max");
    if (!(p.workspace.max.array() > p.workspace.min.array()).all()) {
      throw ScenarioError("workspace max must exceed min", line_of(w));
    }
  }
  if (!root["start"]) throw ScenarioError("missing required key 'start'", 0);
  if (!root["goal"]) throw ScenarioError("missing required key 'goal'", 0);
  p.x_start = read_state(root["start"], "start");
  p.x_goal = read_state(root["goal"], "goal");

  if (const YAML::Node r = root["rates"]) {
    check_keys(r, {"plant", "planner"}, "rates");
    get(r, "plant", s.plant_rate, "rates");
    get(r, "planner", s.planner_rate, "rates");
    if (s.plant_rate < s.planner_rate) {
      throw ScenarioError("rates.plant must be >= rates.planner", line_of(r));
    }
  }
  if (const YAML::Node n = root["robot"]) parse_robot(n, p);
  if (const YAML::Node n = root["limits"]) parse_limits(n, p.limits);
  if (const YAML::Node n = root["noise"]) parse_noise(n, p.noise);
  s.sensor = SensorNoise::from(p.noise);
  if (const YAML::Node n = root["sensor"]) parse_sensor(n, s.sensor);

  s.obstacle.waypoints = {{0.0, 0.5 * (p.workspace.min + p.workspace.max)}};
  if (const YAML::Node n = root["obstacle"]) parse_obstacle(n, s);

  if (const YAML::Node f = root["field"]) {
    check_keys(f, {"eps", "cell", "wall_band"}, "field");
    get(f, "eps", p.eps, "field");
    get(f, "cell", p.sdf.cell, "field");
    get(f, "wall_band", p.sdf.wall_band, "field");
  }
  if (const YAML::Node n = root["gain"]) parse_gain(n, s.gain);
  if (const YAML::Node pl = root["plant"]) {
    check_keys(pl, {"mass_scale", "inertia_scale", "saturate"}, "plant");
    get(pl, "mass_scale", s.mass_scale, "plant");
    get(pl, "inertia_scale", s.inertia_scale, "plant");
    get(pl, "saturate", s.saturate, "plant");
  }
  if (const YAML::Node n = root["optimizer"]) parse_optimizer(n, p);

  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what(), 0);
  }
  return s;
}

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path, 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

namespace {

const char* solver_name(LinearSolver s) {
  switch (s) {
    case LinearSolver::RowSpace: return "row_space";
    case LinearSolver::QR: return "qr";
    case LinearSolver::Cholesky: return "cholesky";
  }
  return "row_space";
}

void emit_vector(YAML::Emitter& out, const Eigen::VectorXd& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index k = 0; k < v.size(); ++k) out << v[k];
  out << YAML::EndSeq;
}

}  // namespace

std::string serialize_scenario(const Scenario& s) {
  const PlannerProblem& p = s.problem;
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << s.name;
  out << YAML::Key << "mode" << YAML::Value << std::string(to_string(p.mode));
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  out << YAML::Key << "horizon" << YAML::Value << p.horizon;
  out << YAML::Key << "dt" << YAML::Value << p.dt;
  out << YAML::Key << "duration" << YAML::Value << s.duration;

  out << YAML::Key << "workspace" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "min" << YAML::Value;
  emit_vector(out, p.workspace.min);
  out << YAML::Key << "max" << YAML::Value;
  emit_vector(out, p.workspace.max);
  out << YAML::EndMap;

  out << YAML::Key << "start" << YAML::Value;
  emit_vector(out, p.x_start);
  out << YAML::Key << "goal" << YAML::Value;
  emit_vector(out, p.x_goal);

  out << YAML::Key << "rates" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "plant" << YAML::Value << s.plant_rate;
  out << YAML::Key << "planner" << YAML::Value << s.planner_rate;
  out << YAML::EndMap;

  out << YAML::Key << "robot" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mass" << YAML::Value << p.params.mass;
  out << YAML::Key << "inertia" << YAML::Value << p.params.inertia;
  out << YAML::Key << "spheres" << YAML::Value << YAML::BeginSeq;
  for (const Sphere& sp : p.spheres.spheres) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "offset" << YAML::Value;
    emit_vector(out, sp.offset);
    out << YAML::Key << "radius" << YAML::Value << sp.radius << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::Key << "limits" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lower" << YAML::Value;
  emit_vector(out, p.limits.lower);
  out << YAML::Key << "upper" << YAML::Value;
  emit_vector(out, p.limits.upper);
  out << YAML::Key << "threshold" << YAML::Value;
  emit_vector(out, p.limits.threshold);
  out << YAML::EndMap;

  out << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "fix" << YAML::Value << p.noise.fix;
  out << YAML::Key << "dyn" << YAML::Value << p.noise.dyn;
  out << YAML::Key << "lim" << YAML::Value << p.noise.lim;
  out << YAML::Key << "obs" << YAML::Value << p.noise.obs;
  out << YAML::Key << "state" << YAML::Value;
  emit_vector(out, p.noise.meas_x);
  out << YAML::Key << "bearing" << YAML::Value << p.noise.bearing;
  out << YAML::Key << "range" << YAML::Value << p.noise.range;
  out << YAML::EndMap;

  out << YAML::Key << "sensor" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "state" << YAML::Value;
  emit_vector(out, s.sensor.state);
  out << YAML::Key << "bearing" << YAML::Value << s.sensor.bearing;
  out << YAML::Key << "range" << YAML::Value << s.sensor.range;
  out << YAML::EndMap;

  out << YAML::Key << "obstacle" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "radius" << YAML::Value << p.obstacle_radius;
  out << YAML::Key << "waypoints" << YAML::Value << YAML::BeginSeq;
  for (const Waypoint& w : s.obstacle.waypoints) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "t" << YAML::Value << w.t;
    out << YAML::Key << "position" << YAML::Value;
    emit_vector(out, w.position);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::Key << "field" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "eps" << YAML::Value << p.eps;
  out << YAML::Key << "cell" << YAML::Value << p.sdf.cell;
  out << YAML::Key << "wall_band" << YAML::Value << p.sdf.wall_band;
  out << YAML::EndMap;

  out << YAML::Key << "gain" << YAML::Value << YAML::BeginMap;
  if (const auto* poles = std::get_if<AxisPoles>(&s.gain)) {
    out << YAML::Key << "poles" << YAML::Value << YAML::BeginSeq;
    for (const auto& pair : poles->poles) {
      out << YAML::Flow << YAML::BeginSeq << pair[0] << pair[1] << YAML::EndSeq;
    }
    out << YAML::EndSeq;
  } else {
    const auto& w = std::get<QuadraticWeights>(s.gain);
    out << YAML::Key << "lqr" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "q" << YAML::Value;
    emit_vector(out, w.Q.diagonal());
    out << YAML::Key << "r" << YAML::Value;
    emit_vector(out, w.R.diagonal());
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  out << YAML::Key << "plant" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mass_scale" << YAML::Value << s.mass_scale;
  out << YAML::Key << "inertia_scale" << YAML::Value << s.inertia_scale;
  out << YAML::Key << "saturate" << YAML::Value << s.saturate;
  out << YAML::EndMap;

  const LmConfig& lm = p.lm;
  out << YAML::Key << "optimizer" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "max_iters" << YAML::Value << lm.max_iters;
  out << YAML::Key << "lambda_init" << YAML::Value << lm.lambda_init;
  out << YAML::Key << "lambda_scale" << YAML::Value << lm.lambda_scale;
  out << YAML::Key << "lambda_min" << YAML::Value << lm.lambda_min;
  out << YAML::Key << "lambda_max" << YAML::Value << lm.lambda_max;
  out << YAML::Key << "abs_tol" << YAML::Value << lm.abs_tol;
  out << YAML::Key << "rel_tol" << YAML::Value << lm.rel_tol;
  out << YAML::Key << "damping" << YAML::Value
      << (lm.damping == DampingMode::Isotropic ? "isotropic" : "marquardt");
  out << YAML::Key << "ordering" << YAML::Value
      << (lm.ordering == OrderingMethod::MinimumDegree ? "minimum_degree" : "natural");
  out << YAML::Key << "solver" << YAML::Value << solver_name(lm.solver);
  out << YAML::Key << "refine" << YAML::Value << lm.refine_passes;
  out << YAML::Key << "condense_past" << YAML::Value << p.condense_past;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

bool same_scenario(const Scenario& a, const Scenario& b) {
  const PlannerProblem& p = a.problem;
  const PlannerProblem& q = b.problem;
  auto same_gain = [](const GainSpec& x, const GainSpec& y) {
    if (x.index() != y.index()) return false;
    if (const auto* px = std::get_if<AxisPoles>(&x)) return px->poles == std::get<AxisPoles>(y).poles;
    const auto& wx = std::get<QuadraticWeights>(x);
    const auto& wy = std::get<QuadraticWeights>(y);
    return wx.Q == wy.Q && wx.R == wy.R;
  };
  auto same_spheres = [](const SphereModel& x, const SphereModel& y) {
    if (x.spheres.size() != y.spheres.size()) return false;
    for (std::size_t k = 0; k < x.spheres.size(); ++k) {
      if (x.spheres[k].offset != y.spheres[k].offset || x.spheres[k].radius != y.spheres[k].radius) {
        return false;
      }
    }
    return true;
  };
  auto same_script = [](const ObstacleScript& x, const ObstacleScript& y) {
    if (x.waypoints.size() != y.waypoints.size()) return false;
    for (std::size_t k = 0; k < x.waypoints.size(); ++k) {
      if (x.waypoints[k].t != y.waypoints[k].t || x.waypoints[k].position != y.waypoints[k].position) {
        return false;
      }
    }
    return true;
  };
  return a.name == b.name && p.mode == q.mode && a.seed == b.seed && p.horizon == q.horizon &&
         p.dt == q.dt && a.duration == b.duration && p.workspace.min == q.workspace.min &&
         p.workspace.max == q.workspace.max && p.x_start == q.x_start && p.x_goal == q.x_goal &&
         a.plant_rate == b.plant_rate && a.planner_rate == b.planner_rate &&
         p.params.mass == q.params.mass && p.params.inertia == q.params.inertia &&
         same_spheres(p.spheres, q.spheres) && p.limits.lower == q.limits.lower &&
         p.limits.upper == q.limits.upper && p.limits.threshold == q.limits.threshold &&
         p.noise.fix == q.noise.fix && p.noise.dyn == q.noise.dyn && p.noise.lim == q.noise.lim &&
         p.noise.obs == q.noise.obs && p.noise.meas_x == q.noise.meas_x &&
         p.noise.bearing == q.noise.bearing && p.noise.range == q.noise.range &&
         a.sensor.state == b.sensor.state && a.sensor.bearing == b.sensor.bearing &&
         a.sensor.range == b.sensor.range && p.obstacle_radius == q.obstacle_radius &&
         same_script(a.obstacle, b.obstacle) && p.eps == q.eps && p.sdf.cell == q.sdf.cell &&
         p.sdf.wall_band == q.sdf.wall_band && same_gain(a.gain, b.gain) &&
         a.mass_scale == b.mass_scale && a.inertia_scale == b.inertia_scale &&
         a.saturate == b.saturate && p.lm.max_iters == q.lm.max_iters &&
         p.lm.lambda_init == q.lm.lambda_init && p.lm.lambda_scale == q.lm.lambda_scale &&
         p.lm.lambda_min == q.lm.lambda_min && p.lm.lambda_max == q.lm.lambda_max &&
         p.lm.abs_tol == q.lm.abs_tol && p.lm.rel_tol == q.lm.rel_tol &&
         p.lm.damping == q.lm.damping && p.lm.ordering == q.lm.ordering &&
         p.lm.solver == q.lm.solver && p.lm.refine_passes == q.lm.refine_passes &&
         p.condense_past == q.condense_past;
}

}  // namespace scate
