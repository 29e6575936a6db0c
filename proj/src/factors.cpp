#include "scate/factors.hpp"

#include <cmath>
#include <stdexcept>

namespace scate {
namespace {

void require_dim(const Eigen::VectorXd& v, Eigen::Index dim, const Key& key) {
  if (v.size() != dim) {
    throw std::invalid_argument("variable " + to_string(key) + " has dimension " +
                                std::to_string(v.size()) + ", expected " + std::to_string(dim));
  }
}

}  // namespace

// --- priors ---------------------------------------------------------------

Eigen::VectorXd prior_residual(const Eigen::VectorXd& value, const Eigen::VectorXd& target,
                               std::span<const int> angle_components) {
  if (value.size() != target.size()) throw std::invalid_argument("prior dimension mismatch");
  Eigen::VectorXd r = value - target;
  for (int a : angle_components) r[a] = wrap_angle(r[a]);
  return r;
}

PriorFactor::PriorFactor(Key key, Eigen::VectorXd target, NoiseModel noise, FactorTag tag,
                         std::vector<int> angle_components)
    : Factor({key}, std::move(noise), tag),
      target_(std::move(target)),
      angles_(std::move(angle_components)) {
  if (target_.size() != dim()) throw std::invalid_argument("prior target/noise dimension mismatch");
  for (int a : angles_) {
    if (a < 0 || a >= target_.size()) throw std::invalid_argument("angle component out of range");
    target_[a] = wrap_angle(target_[a]);
  }
}

std::shared_ptr<PriorFactor> PriorFactor::on_state(Key key, const StateVec& target,
                                                   NoiseModel noise, FactorTag tag) {
  return std::make_shared<PriorFactor>(key, Eigen::VectorXd(target), std::move(noise), tag,
                                       std::vector<int>{state::kPsi});
}

Eigen::VectorXd PriorFactor::evaluate(const Values& values,
                                      std::vector<Eigen::MatrixXd>* jacobians) const {
  const Eigen::VectorXd& v = values.at(keys()[0]);
  require_dim(v, target_.size(), keys()[0]);
  if (jacobians) jacobians->assign(1, Eigen::MatrixXd::Identity(dim(), dim()));
  return prior_residual(v, target_, angles_);
}

// --- bearing / range ------------------------------------------------------

BearingRangeEval bearing_range_residual(const StateVec& x, const Eigen::Vector2d& l,
                                        const BearingRangeMeas& meas) {
  const Eigen::Vector2d d(l.x() - x[state::kX], l.y() - x[state::kY]);
  const double rho2 = d.squaredNorm();
  if (!(std::sqrt(rho2) > 1e-9)) {
    throw std::domain_error("bearing undefined: robot and obstacle coincide");
  }
  const double c = std::cos(x[state::kPsi]);
  const double s = std::sin(x[state::kPsi]);
  // Body-frame displacement R(psi)^T d and its psi-derivative.
  const Eigen::Vector2d body(c * d.x() + s * d.y(), -s * d.x() + c * d.y());
  const Eigen::Vector2d body_dpsi(-s * d.x() + c * d.y(), -c * d.x() - s * d.y());
  const double range = body.norm();

  BearingRangeEval e;
  e.residual[0] = wrap_angle(std::atan2(d.y(), d.x()) - meas.bearing);
  e.residual[1] = range - meas.range;

  const Eigen::RowVector2d dtheta_dl(-d.y() / rho2, d.x() / rho2);
  // d range / d l = body^T R^T / range
  const Eigen::RowVector2d drange_dl(
      (body.x() * c - body.y() * s) / range, (body.x() * s + body.y() * c) / range);

  e.d_obstacle.row(0) = dtheta_dl;
  e.d_obstacle.row(1) = drange_dl;
  e.d_state.setZero();
  e.d_state(0, state::kX) = -dtheta_dl.x();
  e.d_state(0, state::kY) = -dtheta_dl.y();
  e.d_state(1, state::kX) = -drange_dl.x();
  e.d_state(1, state::kY) = -drange_dl.y();
  e.d_state(1, state::kPsi) = body.dot(body_dpsi) / range;
  return e;
}

Eigen::Vector2d back_project(const StateVec& z_x, const BearingRangeMeas& meas) {
  return Eigen::Vector2d(z_x[state::kX] + meas.range * std::cos(meas.bearing),
                         z_x[state::kY] + meas.range * std::sin(meas.bearing));
}

BearingRangeFactor::BearingRangeFactor(Key state, Key obstacle, BearingRangeMeas meas,
                                       double bearing_sigma, double range_sigma)
    : Factor({state, obstacle}, NoiseModel::from_sigmas(Eigen::Vector2d(bearing_sigma, range_sigma)),
             FactorTag::BearingRange),
      meas_(meas) {
  if (meas_.range < 0.0) throw std::invalid_argument("range measurement must be nonnegative");
  meas_.bearing = wrap_angle(meas_.bearing);
}

Eigen::VectorXd BearingRangeFactor::evaluate(const Values& values,
                                             std::vector<Eigen::MatrixXd>* jacobians) const {
  const Eigen::VectorXd& xv = values.at(keys()[0]);
  const Eigen::VectorXd& lv = values.at(keys()[1]);
  require_dim(xv, kStateDim, keys()[0]);
  require_dim(lv, kObstacleDim, keys()[1]);
  const BearingRangeEval e = bearing_range_residual(StateVec(xv), Eigen::Vector2d(lv), meas_);
  if (jacobians) {
    jacobians->clear();
    jacobians->emplace_back(e.d_state);
    jacobians->emplace_back(e.d_obstacle);
  }
  return e.residual;
}

// --- dynamics -------------------------------------------------------------

Eigen::VectorXd dynamics_residual(const Eigen::VectorXd& x_next, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u, const DiscreteModel& model) {
  if (x.size() != model.Fx.cols() || x_next.size() != model.Fx.rows() ||
      u.size() != model.Fu.cols()) {
    throw std::invalid_argument("dynamics dimension mismatch");
  }
  Eigen::VectorXd r = x_next - model.Fx * x - model.Fu * u;
  if (r.size() == kStateDim) r[state::kPsi] = wrap_angle(r[state::kPsi]);
  return r;
}

DynamicsFactor::DynamicsFactor(Key x_next, Key x, Key u, std::shared_ptr<const DiscreteModel> model,
                               NoiseModel noise)
    : Factor({x_next, x, u}, std::move(noise), FactorTag::Dynamics), model_(std::move(model)) {
  if (!model_) throw std::invalid_argument("null dynamics model");
  if (dim() != model_->Fx.rows()) throw std::invalid_argument("dynamics noise dimension mismatch");
}

Eigen::VectorXd DynamicsFactor::evaluate(const Values& values,
                                         std::vector<Eigen::MatrixXd>* jacobians) const {
  const Eigen::VectorXd r =
      dynamics_residual(values.at(keys()[0]), values.at(keys()[1]), values.at(keys()[2]), *model_);
  if (jacobians) {
    jacobians->clear();
    jacobians->emplace_back(Eigen::MatrixXd::Identity(dim(), dim()));
    jacobians->emplace_back(-model_->Fx);
    jacobians->emplace_back(-model_->Fu);
  }
  return r;
}

// --- control limits -------------------------------------------------------

ControlLimits ControlLimits::planar_default() {
  ControlLimits lim;
  lim.upper = Eigen::Vector3d(2.0, 2.0, 0.5);
  lim.lower = -lim.upper;
  lim.threshold = 0.05 * lim.upper;
  return lim;
}

void ControlLimits::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size() || lower.size() != threshold.size()) {
    throw std::invalid_argument("control limit vectors must share a nonzero dimension");
  }
  if ((threshold.array() < 0.0).any()) throw std::invalid_argument("thresholds must be >= 0");
  if (!((lower + threshold).array() < (upper - threshold).array()).all()) {
    throw std::invalid_argument("control limits leave no feasible interior");
  }
}

HingeVector control_limit_residual(const Eigen::VectorXd& u, const ControlLimits& limits) {
  if (u.size() != limits.lower.size()) throw std::invalid_argument("control dimension mismatch");
  HingeVector h{Eigen::VectorXd::Zero(u.size()), Eigen::VectorXd::Zero(u.size())};
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double lo = limits.lower[j] + limits.threshold[j];
    const double hi = limits.upper[j] - limits.threshold[j];
    if (u[j] < lo) {
      h.residual[j] = lo - u[j];
      h.slope[j] = -1.0;
    } else if (u[j] == lo) {
      h.slope[j] = -0.5;
    } else if (u[j] < hi) {
      // inside the band
    } else if (u[j] == hi) {
      h.slope[j] = 0.5;
    } else {
      h.residual[j] = u[j] - hi;
      h.slope[j] = 1.0;
    }
  }
  return h;
}

ControlLimitFactor::ControlLimitFactor(Key u, ControlLimits limits, NoiseModel noise)
    : Factor({u}, std::move(noise), FactorTag::ControlLimit), limits_(std::move(limits)) {
  limits_.validate();
  if (dim() != limits_.lower.size()) throw std::invalid_argument("limit noise dimension mismatch");
}

Eigen::VectorXd ControlLimitFactor::evaluate(const Values& values,
                                             std::vector<Eigen::MatrixXd>* jacobians) const {
  const HingeVector h = control_limit_residual(values.at(keys()[0]), limits_);
  if (jacobians) jacobians->assign(1, Eigen::MatrixXd(h.slope.asDiagonal()));
  return h.residual;
}

// --- obstacle -------------------------------------------------------------

ObstacleEval obstacle_residual(const StateVec& x, const Sdf& field, const SphereModel& spheres,
                               double eps) {
  const auto placed = robot_spheres(x, spheres);
  const auto m = static_cast<Eigen::Index>(placed.size());
  ObstacleEval e{Eigen::VectorXd::Zero(m), Eigen::MatrixXd::Zero(m, kStateDim)};
  for (Eigen::Index j = 0; j < m; ++j) {
    const PlacedSphere& s = placed[static_cast<std::size_t>(j)];
    const SdfSample q = field.query(s.center);
    const HingeValue h = hinge_cost(q.distance - s.radius, eps);
    e.residual[j] = h.cost;
    if (h.slope != 0.0) {
      const Eigen::RowVector3d d = h.slope * q.gradient.transpose() * s.jacobian;
      e.d_state(j, state::kX) = d[0];
      e.d_state(j, state::kY) = d[1];
      e.d_state(j, state::kPsi) = d[2];
    }
  }
  return e;
}

ObstacleFactor::ObstacleFactor(Key x, SdfPtr field, SphereModel spheres, double eps,
                               NoiseModel noise)
    : Factor({x}, std::move(noise), FactorTag::Obstacle),
      field_(std::move(field)),
      spheres_(std::move(spheres)),
      eps_(eps) {
  if (!field_) throw std::invalid_argument("null obstacle field");
  if (spheres_.spheres.empty()) throw std::invalid_argument("sphere model needs at least one sphere");
  for (const Sphere& s : spheres_.spheres) {
    if (!(s.radius > 0.0)) throw std::invalid_argument("sphere radii must be positive");
  }
  if (dim() != static_cast<int>(spheres_.spheres.size())) {
    throw std::invalid_argument("obstacle noise dimension must equal the sphere count");
  }
  if (!(eps_ > 0.0)) throw std::invalid_argument("safety distance must be positive");
}

Eigen::VectorXd ObstacleFactor::evaluate(const Values& values,
                                         std::vector<Eigen::MatrixXd>* jacobians) const {
  const Eigen::VectorXd& xv = values.at(keys()[0]);
  require_dim(xv, kStateDim, keys()[0]);
  ObstacleEval e = obstacle_residual(StateVec(xv), *field_, spheres_, eps_);
  if (jacobians) jacobians->assign(1, std::move(e.d_state));
  return e.residual;
}

// --- condensed past ---------------------------------------------------------

LinearStateFactor::LinearStateFactor(Key x, Eigen::MatrixXd a, Eigen::VectorXd b, StateVec ref)
    : Factor({x}, NoiseModel::isotropic(static_cast<int>(a.rows()), 1.0), FactorTag::Condensed),
      a_(std::move(a)),
      b_(std::move(b)),
      ref_(ref) {
  if (a_.rows() == 0 || a_.cols() != kStateDim || b_.size() != a_.rows()) {
    throw std::invalid_argument("linear state factor dimension mismatch");
  }
}

Eigen::VectorXd LinearStateFactor::evaluate(const Values& values,
                                            std::vector<Eigen::MatrixXd>* jacobians) const {
  const StateVec x = values.at(keys()[0]);
  if (jacobians) {
    jacobians->clear();
    jacobians->push_back(a_);
  }
  return a_ * state_difference(x, ref_) + b_;
}

}  // namespace scate

