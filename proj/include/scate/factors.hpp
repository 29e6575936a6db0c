#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scate/dynamics.hpp"
#include "scate/factor_graph.hpp"
#include "scate/obstacle_field.hpp"

namespace scate {

// ---------------------------------------------------------------------------
// Priors: start, goal and state measurement factors share one residual,
// r = value - target with angle components wrapped. Jacobian is identity.

Eigen::VectorXd prior_residual(const Eigen::VectorXd& value, const Eigen::VectorXd& target,
                               std::span<const int> angle_components = {});

class PriorFactor final : public Factor {
 public:
  PriorFactor(Key key, Eigen::VectorXd target, NoiseModel noise, FactorTag tag,
              std::vector<int> angle_components = {});

  /// Prior on a planar state; wraps the heading.
  static std::shared_ptr<PriorFactor> on_state(Key key, const StateVec& target, NoiseModel noise,
                                               FactorTag tag);

  const Eigen::VectorXd& target() const { return target_; }

  Eigen::VectorXd evaluate(const Values& values,
                           std::vector<Eigen::MatrixXd>* jacobians = nullptr) const override;

 private:
  Eigen::VectorXd target_;
  std::vector<int> angles_;
};

// ---------------------------------------------------------------------------
// Bearing/range to an obstacle. Bearing is measured in the inertial frame;
// range is the norm of the body-frame displacement R(psi)^T (l - p).

struct BearingRangeMeas {
  double bearing = 0.0;  // rad
  double range = 0.0;    // m
};

struct BearingRangeEval {
  Eigen::Vector2d residual;                       ///< (bearing, range)
  Eigen::Matrix<double, 2, kStateDim> d_state;
  Eigen::Matrix2d d_obstacle;
};

/// Throws std::domain_error when robot and obstacle coincide.
BearingRangeEval bearing_range_residual(const StateVec& x, const Eigen::Vector2d& l,
                                        const BearingRangeMeas& meas);

/// Obstacle position implied by a state measurement and a bearing/range pair.
Eigen::Vector2d back_project(const StateVec& z_x, const BearingRangeMeas& meas);

class BearingRangeFactor final : public Factor {
 public:
  BearingRangeFactor(Key state, Key obstacle, BearingRangeMeas meas, double bearing_sigma,
                     double range_sigma);

  const BearingRangeMeas& measurement() const { return meas_; }

  Eigen::VectorXd evaluate(const Values& values,
                           std::vector<Eigen::MatrixXd>* jacobians = nullptr) const override;

 private:
  BearingRangeMeas meas_;
};

// ---------------------------------------------------------------------------
// Discrete LTI dynamics: r = x_next - Fx x - Fu u, heading component wrapped.

Eigen::VectorXd dynamics_residual(const Eigen::VectorXd& x_next, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u, const DiscreteModel& model);

class DynamicsFactor final : public Factor {
 public:
  /// Keys are ordered (x_next, x, u).
  DynamicsFactor(Key x_next, Key x, Key u, std::shared_ptr<const DiscreteModel> model,
                 NoiseModel noise);

  Eigen::VectorXd evaluate(const Values& values,
                           std::vector<Eigen::MatrixXd>* jacobians = nullptr) const override;

 private:
  std::shared_ptr<const DiscreteModel> model_;
};

// ---------------------------------------------------------------------------
// Control limits: per-component hinge that is zero on
// [lower + threshold, upper - threshold] and grows linearly outside.

struct ControlLimits {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd threshold;

  /// |fx|, |fy| <= 2 N, |tau| <= 0.5 N m, threshold 5% of the half-range.
  static ControlLimits planar_default();
  /// Throws std::invalid_argument unless the inner band is nonempty.
  void validate() const;
};

struct HingeVector {
  Eigen::VectorXd residual;
  Eigen::VectorXd slope;  ///< diagonal of the Jacobian
};

HingeVector control_limit_residual(const Eigen::VectorXd& u, const ControlLimits& limits);

class ControlLimitFactor final : public Factor {
 public:
  ControlLimitFactor(Key u, ControlLimits limits, NoiseModel noise);

  const ControlLimits& limits() const { return limits_; }

  Eigen::VectorXd evaluate(const Values& values,
                           std::vector<Eigen::MatrixXd>* jacobians = nullptr) const override;

 private:
  ControlLimits limits_;
};

// ---------------------------------------------------------------------------
// Obstacle cost: one hinge per robot sphere on its signed clearance
// D(center_j) - radius_j. The obstacle location is baked into the field.

struct ObstacleEval {
  Eigen::VectorXd residual;  ///< M entries
  Eigen::MatrixXd d_state;   ///< M x 6
};

ObstacleEval obstacle_residual(const StateVec& x, const Sdf& field, const SphereModel& spheres,
                               double eps);

class ObstacleFactor final : public Factor {
 public:
  ObstacleFactor(Key x, SdfPtr field, SphereModel spheres, double eps, NoiseModel noise);

  const SdfPtr& field() const { return field_; }
  double eps() const { return eps_; }

  Eigen::VectorXd evaluate(const Values& values,
                           std::vector<Eigen::MatrixXd>* jacobians = nullptr) const override;

 private:
  SdfPtr field_;
  SphereModel spheres_;
  double eps_;
};

// --- condensed past ---------------------------------------------------------

/// Whitened linear factor on one state, r = A (x - ref) + b with the heading
/// difference wrapped. Unit noise.
class LinearStateFactor : public Factor {
 public:
  LinearStateFactor(Key x, Eigen::MatrixXd a, Eigen::VectorXd b, StateVec ref);

  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::VectorXd& b() const { return b_; }
  const StateVec& ref() const { return ref_; }

  Eigen::VectorXd evaluate(const Values& values,
                           std::vector<Eigen::MatrixXd>* jacobians = nullptr) const override;

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  StateVec ref_;
};

}  // namespace scate
