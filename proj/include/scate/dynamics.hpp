#pragma once

#include <array>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "scate/values.hpp"

namespace scate {

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using ControlVec = Eigen::Matrix<double, kControlDim, 1>;

/// Indices into StateVec.
namespace state {
inline constexpr int kX = 0;
inline constexpr int kVx = 1;
inline constexpr int kY = 2;
inline constexpr int kVy = 3;
inline constexpr int kPsi = 4;
inline constexpr int kOmega = 5;
}  // namespace state

struct PlanarParams {
  double mass = 10.0;     // kg
  double inertia = 1.0;   // kg m^2
};

/// Continuous LTI system xdot = A x + B u.
struct ContinuousModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

/// Zero-order-hold discretization x+ = Fx x + Fu u over `dt`.
struct DiscreteModel {
  Eigen::MatrixXd Fx;
  Eigen::MatrixXd Fu;
  double dt = 0.0;
};

/// Both forms of one system, plus the physical parameters it came from.
struct LtiModel {
  ContinuousModel continuous;
  DiscreteModel discrete;
  PlanarParams params;
};

/// Three decoupled double integrators (x, y, psi) driven by body force and
/// torque: m r'' = f, Izz psi'' = tau.
ContinuousModel planar_model(double mass, double inertia);

/// Fx = exp(A dt); Fu = int_0^dt exp(A s) ds B, read off the upper-right
/// block of exp([[A, B], [0, 0]] dt).
DiscreteModel discretize_lti(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double dt);

LtiModel make_planar_lti(const PlanarParams& params, double dt);

/// Closed-loop pole pair per control axis, for systems built from decoupled
/// double integrators (one acceleration row per input).
struct AxisPoles {
  std::vector<std::array<double, 2>> poles;
};

/// Infinite-horizon LQR weights.
struct QuadraticWeights {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
};

using GainSpec = std::variant<AxisPoles, QuadraticWeights>;

/// Default tracking design: translation {-0.8, -1.2}, rotation {-1.0, -1.5}.
AxisPoles default_planar_poles();

struct FeedbackGain {
  Eigen::MatrixXd K;
};

/// Largest real part among the eigenvalues of A - B K.
double closed_loop_abscissa(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const Eigen::MatrixXd& K);

/// Throws std::domain_error unless A - B K is Hurwitz.
void require_hurwitz(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& K);

FeedbackGain design_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const GainSpec& spec);

/// One exact plant step; the heading is re-wrapped.
StateVec propagate_plant(const StateVec& x, const ControlVec& u, double dt_plant,
                         const ContinuousModel& model);

/// Same, with a precomputed discretization.
StateVec propagate_plant(const StateVec& x, const ControlVec& u, const DiscreteModel& model);

/// x - y with the heading difference wrapped.
StateVec state_difference(const StateVec& x, const StateVec& y);

}  // namespace scate
