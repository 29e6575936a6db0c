#include "scate/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "scate/dynamics.hpp"
#include "scate/factors.hpp"
#include "scate/linear_system.hpp"
#include "scate/obstacle_field.hpp"
#include "scate/optimizer.hpp"

namespace scate {

double jacobian_error(const Factor& factor, const Values& point, double step) {
  std::vector<Eigen::MatrixXd> analytic;
  factor.evaluate(point, &analytic);
  double worst = 0.0;
  for (std::size_t k = 0; k < factor.keys().size(); ++k) {
    const Key& key = factor.keys()[k];
    const Eigen::VectorXd base = point.at(key);
    Eigen::MatrixXd fd(factor.dim(), base.size());
    for (Eigen::Index c = 0; c < base.size(); ++c) {
      Values plus = point;
      Values minus = point;
      Eigen::VectorXd vp = base;
      Eigen::VectorXd vm = base;
      vp[c] += step;
      vm[c] -= step;
      plus.update(key, vp);
      minus.update(key, vm);
      fd.col(c) = (factor.evaluate(plus) - factor.evaluate(minus)) / (2.0 * step);
    }
    const double denom = std::max(fd.norm(), 1e-12);
    worst = std::max(worst, (analytic[k] - fd).norm() / denom);
  }
  return worst;
}

CheckResult check_jacobian(const JacobianCase& c, int samples, double step, double tol,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CheckResult r{"jacobian", c.name, true, ""};
  int tested = 0;
  int attempts = 0;
  double worst = 0.0;
  while (tested < samples && attempts < 100 * samples) {
    ++attempts;
    const Values v = c.sample(rng);
    if (c.near_kink(v)) continue;
    worst = std::max(worst, jacobian_error(*c.factor, v, step));
    ++tested;
  }
  std::ostringstream os;
  os << tested << " points, max rel err " << worst;
  r.detail = os.str();
  r.passed = tested == samples && worst < tol;
  return r;
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

StateVec random_state(std::mt19937_64& rng) {
  StateVec x;
  x << uniform(rng, 0, 4), uniform(rng, -1, 1), uniform(rng, 0, 4), uniform(rng, -1, 1),
      uniform(rng, -3, 3), uniform(rng, -1, 1);
  return x;
}

bool near_grid_line(const Sdf& f, const Eigen::Vector2d& p, double tol) {
  const Eigen::Vector2d g = (p - f.origin()) / f.cell();
  for (int a = 0; a < 2; ++a) {
    const double frac = g[a] - std::floor(g[a]);
    if (frac < tol || frac > 1.0 - tol) return true;
  }
  return false;
}

}  // namespace

std::vector<JacobianCase> default_jacobian_cases() {
  std::vector<JacobianCase> cases;

  auto prior_case = [](FactorTag tag) {
    JacobianCase c;
    c.name = std::string(to_string(tag));
    StateVec target;
    target << 1.0, 0.2, 2.0, -0.1, 0.4, 0.05;
    c.factor = PriorFactor::on_state(X(0), target, NoiseModel::isotropic(kStateDim, 0.1), tag);
    c.sample = [](std::mt19937_64& rng) {
      Values v;
      StateVec x = random_state(rng);
      x[state::kPsi] = uniform(rng, -2.0, 2.5);
      v.insert(X(0), x);
      return v;
    };
    return c;
  };
  cases.push_back(prior_case(FactorTag::Start));
  cases.push_back(prior_case(FactorTag::Goal));
  cases.push_back(prior_case(FactorTag::StateMeasurement));

  {
    JacobianCase c;
    c.name = std::string(to_string(FactorTag::BearingRange));
    c.factor = std::make_shared<BearingRangeFactor>(X(0), L(0), BearingRangeMeas{0.7, 1.5}, 0.03, 0.02);
    c.sample = [](std::mt19937_64& rng) {
      Values v;
      const StateVec x = random_state(rng);
      const double ang = 0.7 + uniform(rng, -1.5, 1.5);
      const double rho = uniform(rng, 0.2, 3.0);
      v.insert(X(0), x);
      v.insert(L(0), Eigen::Vector2d(x[state::kX] + rho * std::cos(ang), x[state::kY] + rho * std::sin(ang)));
      return v;
    };
    cases.push_back(std::move(c));
  }
  {
    JacobianCase c;
    c.name = std::string(to_string(FactorTag::Dynamics));
    auto model = std::make_shared<const DiscreteModel>(make_planar_lti({}, 1.0).discrete);
    c.factor = std::make_shared<DynamicsFactor>(X(1), X(0), U(0), model, NoiseModel::isotropic(kStateDim, 1e-3));
    c.sample = [](std::mt19937_64& rng) {
      Values v;
      const StateVec x0 = random_state(rng);
      StateVec x1 = x0;
      for (int k = 0; k < kStateDim; ++k) x1[k] += uniform(rng, -0.5, 0.5);
      x1[state::kPsi] = wrap_angle(x1[state::kPsi]);
      v.insert(X(0), x0);
      v.insert(X(1), x1);
      v.insert(U(0), Eigen::Vector3d(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -0.5, 0.5)));
      return v;
    };
    c.near_kink = [model](const Values& v) {
      const Eigen::VectorXd r = model->Fx * v.at(X(0)) + model->Fu * v.at(U(0));
      return std::abs(wrap_angle(v.at(X(1))[state::kPsi] - r[state::kPsi])) > 3.0;
    };
    cases.push_back(std::move(c));
  }
  {
    JacobianCase c;
    c.name = std::string(to_string(FactorTag::ControlLimit));
    const ControlLimits lim = ControlLimits::planar_default();
    c.factor = std::make_shared<ControlLimitFactor>(U(0), lim, NoiseModel::isotropic(kControlDim, 1e-2));
    c.sample = [](std::mt19937_64& rng) {
      Values v;
      v.insert(U(0), Eigen::Vector3d(uniform(rng, -2.5, 2.5), uniform(rng, -2.5, 2.5), uniform(rng, -0.7, 0.7)));
      return v;
    };
    c.near_kink = [lim](const Values& v) {
      const Eigen::VectorXd& u = v.at(U(0));
      for (int j = 0; j < kControlDim; ++j) {
        if (std::abs(u[j] - (lim.lower[j] + lim.threshold[j])) < 1e-4 ||
            std::abs(u[j] - (lim.upper[j] - lim.threshold[j])) < 1e-4) {
          return true;
        }
      }
      return false;
    };
    cases.push_back(std::move(c));
  }
  {
    JacobianCase c;
    c.name = std::string(to_string(FactorTag::Obstacle));
    const Circle circle{Eigen::Vector2d(2.0, 2.0), 0.15};
    const SdfPtr field = std::make_shared<const Sdf>(build_sdf(std::span(&circle, 1), Workspace{}));
    SphereModel spheres;
    spheres.spheres = {Sphere{Eigen::Vector2d(0.1, 0.0), 0.2}, Sphere{Eigen::Vector2d(-0.1, 0.05), 0.2}};
    const double eps = 0.4;
    c.factor = std::make_shared<ObstacleFactor>(X(0), field, spheres, eps, NoiseModel::isotropic(2, 0.05));
    c.sample = [](std::mt19937_64& rng) {
      Values v;
      StateVec x = random_state(rng);
      const double ang = uniform(rng, -3.14, 3.14);
      const double rho = uniform(rng, 0.3, 1.0);
      x[state::kX] = 2.0 + rho * std::cos(ang);
      x[state::kY] = 2.0 + rho * std::sin(ang);
      v.insert(X(0), x);
      return v;
    };
    c.near_kink = [field, spheres, eps](const Values& v) {
      for (const PlacedSphere& s : robot_spheres(StateVec(v.at(X(0))), spheres)) {
        if (std::abs(field->query(s.center).distance - s.radius - eps) < 1e-4) return true;
        if (near_grid_line(*field, s.center, 1e-3)) return true;
      }
      return false;
    };
    cases.push_back(std::move(c));
  }
  {
    JacobianCase c;
    c.name = std::string(to_string(FactorTag::Condensed));
    std::mt19937_64 gen(5);
    std::normal_distribution<double> gauss;
    const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(4, kStateDim, [&] { return gauss(gen); });
    const Eigen::VectorXd b = Eigen::VectorXd::NullaryExpr(4, [&] { return gauss(gen); });
    StateVec ref;
    ref << 1.0, 0.0, 1.5, 0.1, 2.9, 0.0;
    c.factor = std::make_shared<LinearStateFactor>(X(0), a, b, ref);
    c.sample = [](std::mt19937_64& rng) {
      Values v;
      v.insert(X(0), random_state(rng));
      return v;
    };
    c.near_kink = [ref](const Values& v) {
      return std::abs(wrap_angle(v.at(X(0))[state::kPsi] - ref[state::kPsi])) > 3.1;
    };
    cases.push_back(std::move(c));
  }
  return cases;
}

namespace {

CheckResult check_coverage(std::span<const JacobianCase> cases) {
  CheckResult r{"registry", "every factor tag has a Jacobian case", true, ""};
  for (FactorTag tag : kAllFactorTags) {
    const bool found = std::any_of(cases.begin(), cases.end(),
                                   [&](const JacobianCase& c) { return c.factor->tag() == tag; });
    if (!found) {
      r.passed = false;
      r.detail += std::string(r.detail.empty() ? "missing " : ", ") + std::string(to_string(tag));
    }
  }
  if (r.passed) r.detail = std::to_string(std::size(kAllFactorTags)) + " tags covered";
  return r;
}

std::vector<CheckResult> check_kinks() {
  std::vector<CheckResult> out;
  {
    const ControlLimits lim = ControlLimits::planar_default();
    Eigen::Vector3d u_lo = lim.lower + lim.threshold;
    Eigen::Vector3d u_hi = lim.upper - lim.threshold;
    const HingeVector lo = control_limit_residual(u_lo, lim);
    const HingeVector hi = control_limit_residual(u_hi, lim);
    const bool ok = (lo.slope.array() == -0.5).all() && (hi.slope.array() == 0.5).all() &&
                    lo.residual.isZero(0.0) && hi.residual.isZero(0.0);
    out.push_back({"kink", "control limit subgradient -0.5 / +0.5", ok, ""});
  }
  {
    const HingeValue h = hinge_cost(0.4, 0.4);
    out.push_back({"kink", "obstacle hinge subgradient -0.5", h.cost == 0.0 && h.slope == -0.5, ""});
  }
  {
    // Linear field D(x, y) = x - 1 on a coarse grid, robot sphere exactly at
    // clearance eps.
    const int n = 9;
    std::vector<double> data(n * n);
    for (int iy = 0; iy < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) data[iy * n + ix] = 0.5 * ix - 1.0;
    }
    auto field = std::make_shared<const Sdf>(Eigen::Vector2d::Zero(), 0.5, n, n, data);
    SphereModel spheres;
    spheres.spheres = {Sphere{Eigen::Vector2d::Zero(), 0.25}};
    ObstacleFactor f(X(0), field, spheres, 0.5, NoiseModel::isotropic(1, 1.0));
    Values v;
    StateVec x = StateVec::Zero();
    x[state::kX] = 1.75;
    x[state::kY] = 1.0;
    v.insert(X(0), x);
    std::vector<Eigen::MatrixXd> j;
    const Eigen::VectorXd r = f.evaluate(v, &j);
    const bool ok = r[0] == 0.0 && j[0](0, state::kX) == -0.5 && j[0](0, state::kY) == 0.0;
    out.push_back({"kink", "obstacle factor chain rule at the kink", ok, ""});
  }
  return out;
}

std::vector<CheckResult> check_hinges() {
  std::vector<CheckResult> out;
  const double eps = 0.4;
  bool continuous = true;
  bool support = true;
  double prev = hinge_cost(eps - 1e-3, eps).cost;
  for (int k = 1; k <= 2000; ++k) {
    const double d = eps - 1e-3 + k * 1e-6;
    const HingeValue h = hinge_cost(d, eps);
    if (std::abs(h.cost - prev) > 1e-6 + 1e-12) continuous = false;
    if (d > eps && h.cost != 0.0) support = false;
    if (d < eps && !(h.cost > 0.0)) support = false;
    prev = h.cost;
  }
  out.push_back({"hinge", "obstacle hinge continuous", continuous, ""});
  out.push_back({"hinge", "obstacle hinge support is d <= eps", support, ""});

  const ControlLimits lim = ControlLimits::planar_default();
  bool limit_continuous = true;
  for (int j = 0; j < kControlDim; ++j) {
    for (double edge : {lim.lower[j] + lim.threshold[j], lim.upper[j] - lim.threshold[j]}) {
      Eigen::Vector3d a = Eigen::Vector3d::Zero();
      Eigen::Vector3d b = Eigen::Vector3d::Zero();
      a[j] = edge - 1e-9;
      b[j] = edge + 1e-9;
      const double jump = (control_limit_residual(a, lim).residual - control_limit_residual(b, lim).residual).norm();
      if (jump > 1e-8) limit_continuous = false;
    }
  }
  out.push_back({"hinge", "control limit hinge continuous", limit_continuous, ""});
  return out;
}

std::vector<CheckResult> check_dense_oracle() {
  std::vector<CheckResult> out;
  const LtiModel model = make_planar_lti({}, 1.0);
  auto disc = std::make_shared<const DiscreteModel>(model.discrete);
  const ControlLimits lim = ControlLimits::planar_default();
  for (int n : {2, 3, 5}) {
    FactorGraph g;
    StateVec start = StateVec::Zero();
    StateVec goal;
    goal << 0.08, 0.0, -0.05, 0.0, 0.2, 0.0;
    g.add(PriorFactor::on_state(X(0), start, NoiseModel::isotropic(kStateDim, 1e-4), FactorTag::Start));
    g.add(PriorFactor::on_state(X(n), goal, NoiseModel::isotropic(kStateDim, 1e-4), FactorTag::Goal));
    for (int i = 0; i < n; ++i) {
      g.add(std::make_shared<DynamicsFactor>(X(i + 1), X(i), U(i), disc, NoiseModel::isotropic(kStateDim, 1e-3)));
      g.add(std::make_shared<ControlLimitFactor>(U(i), lim, NoiseModel::isotropic(kControlDim, 1e-2)));
    }
    Values init;
    for (int i = 0; i <= n; ++i) init.insert(X(i), StateVec::Zero());
    for (int i = 0; i < n; ++i) init.insert(U(i), Eigen::VectorXd::Zero(kControlDim));

    const LmResult lm = optimize_lm(g, init);
    const LinearSystem sys = linearize(g, init, compute_ordering(g, OrderingMethod::Natural));
    const Eigen::MatrixXd J(sys.jacobian);
    const Eigen::VectorXd delta = J.completeOrthogonalDecomposition().solve(-sys.residual);

    Eigen::VectorXd dense(delta.size());
    Eigen::VectorXd sparse(delta.size());
    bool inactive = true;
    for (std::size_t s = 0; s < sys.ordering.size(); ++s) {
      const Key& key = sys.ordering[s];
      const VariableSlot& slot = sys.slots.at(key);
      dense.segment(slot.offset, slot.dim) = init.at(key) + delta.segment(slot.offset, slot.dim);
      sparse.segment(slot.offset, slot.dim) = lm.values.at(key);
      if (key.kind == VarKind::Control && !control_limit_residual(lm.values.at(key), lim).residual.isZero(0.0)) {
        inactive = false;
      }
    }
    const double rel = (sparse - dense).norm() / dense.norm();
    std::ostringstream os;
    os << "rel err " << rel << ", accepted iterations " << lm.stats.iterations;
    out.push_back({"dense_oracle", "N = " + std::to_string(n),
                   inactive && rel < 1e-8 && lm.stats.iterations == 1 && lm.stats.converged, os.str()});
  }
  return out;
}

std::vector<CheckResult> check_discretization() {
  std::vector<CheckResult> out;
  {
    const double dt = 0.7;
    const ContinuousModel c = planar_model(10.0, 1.0);
    const DiscreteModel d = discretize_lti(c.A, c.B, dt);
    const Eigen::MatrixXd fx = Eigen::MatrixXd::Identity(kStateDim, kStateDim) + c.A * dt;
    const Eigen::MatrixXd fu = c.B * dt + c.A * c.B * (dt * dt / 2.0);
    const double err = std::max((d.Fx - fx).cwiseAbs().maxCoeff(), (d.Fu - fu).cwiseAbs().maxCoeff());
    out.push_back({"discretization", "planar model nilpotent closed form", err < 1e-12,
                   "max abs err " + std::to_string(err)});
  }
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 4;
    const int m = 1 + trial % 2;
    Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return gauss(rng); });
    if (trial % 2 == 0) {
      const double shift = Eigen::EigenSolver<Eigen::MatrixXd>(A, false).eigenvalues().real().maxCoeff();
      A -= (shift + 0.5) * Eigen::MatrixXd::Identity(n, n);
    } else {
      A = A.triangularView<Eigen::StrictlyUpper>();
    }
    const Eigen::MatrixXd B = Eigen::MatrixXd::NullaryExpr(n, m, [&] { return gauss(rng); });
    const double dt = 0.3 + 0.05 * trial;
    const DiscreteModel full = discretize_lti(A, B, dt);
    const DiscreteModel half = discretize_lti(A, B, dt / 2.0);
    worst = std::max(worst, (half.Fx * half.Fx - full.Fx).cwiseAbs().maxCoeff());
    worst = std::max(worst, (half.Fx * half.Fu + half.Fu - full.Fu).cwiseAbs().maxCoeff());
  }
  out.push_back({"discretization", "semigroup over 20 random stable and nilpotent A", worst < 1e-10,
                 "max abs err " + std::to_string(worst)});
  return out;
}

std::vector<CheckResult> check_hurwitz() {
  std::vector<CheckResult> out;
  const ContinuousModel c = planar_model(10.0, 1.0);
  {
    const FeedbackGain k = design_gain(c.A, c.B, default_planar_poles());
    const double a = closed_loop_abscissa(c.A, c.B, k.K);
    out.push_back({"hurwitz", "default pole placement", a < 0.0, "max Re " + std::to_string(a)});
  }
  {
    const QuadraticWeights w{Eigen::MatrixXd::Identity(kStateDim, kStateDim),
                             Eigen::MatrixXd::Identity(kControlDim, kControlDim)};
    const FeedbackGain k = design_gain(c.A, c.B, w);
    const double a = closed_loop_abscissa(c.A, c.B, k.K);
    out.push_back({"hurwitz", "LQR with identity weights", a < 0.0, "max Re " + std::to_string(a)});
  }
  {
    bool rejected = false;
    try {
      require_hurwitz(c.A, c.B, Eigen::MatrixXd::Zero(kControlDim, kStateDim));
    } catch (const std::domain_error&) {
      rejected = true;
    }
    out.push_back({"hurwitz", "zero gain rejected", rejected, ""});
  }
  return out;
}

}  // namespace

std::vector<CheckResult> run_verification(std::span<const JacobianCase> cases) {
  std::vector<CheckResult> out;
  auto guarded = [&out](const std::string& suite, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      out.push_back({suite, "suite raised", false, e.what()});
    }
  };
  for (const JacobianCase& c : cases) {
    guarded("jacobian", [&] { out.push_back(check_jacobian(c)); });
  }
  out.push_back(check_coverage(cases));
  guarded("kink", [&] { for (auto& r : check_kinks()) out.push_back(r); });
  guarded("hinge", [&] { for (auto& r : check_hinges()) out.push_back(r); });
  guarded("dense_oracle", [&] { for (auto& r : check_dense_oracle()) out.push_back(r); });
  guarded("discretization", [&] { for (auto& r : check_discretization()) out.push_back(r); });
  guarded("hurwitz", [&] { for (auto& r : check_hurwitz()) out.push_back(r); });
  return out;
}

std::vector<CheckResult> run_verification() {
  const std::vector<JacobianCase> cases = default_jacobian_cases();
  return run_verification(cases);
}

}  // namespace scate
