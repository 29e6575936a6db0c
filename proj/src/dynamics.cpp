#include "scate/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace scate {

ContinuousModel planar_model(double mass, double inertia) {
  if (!(mass > 0.0) || !(inertia > 0.0)) {
    throw std::invalid_argument("mass and inertia must be positive");
  }
  ContinuousModel m;
  m.A = Eigen::MatrixXd::Zero(kStateDim, kStateDim);
  m.B = Eigen::MatrixXd::Zero(kStateDim, kControlDim);
  m.A(state::kX, state::kVx) = 1.0;
  m.A(state::kY, state::kVy) = 1.0;
  m.A(state::kPsi, state::kOmega) = 1.0;
  m.B(state::kVx, 0) = 1.0 / mass;
  m.B(state::kVy, 1) = 1.0 / mass;
  m.B(state::kOmega, 2) = 1.0 / inertia;
  return m;
}

DiscreteModel discretize_lti(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n) throw std::invalid_argument("A/B shape mismatch");

  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = A * dt;
  aug.topRightCorner(n, m) = B * dt;
  const Eigen::MatrixXd e = aug.exp();

  DiscreteModel d;
  d.Fx = e.topLeftCorner(n, n);
  d.Fu = e.topRightCorner(n, m);
  d.dt = dt;
  if (!d.Fx.allFinite() || !d.Fu.allFinite()) {
    throw std::domain_error("discretization produced non-finite entries");
  }
  return d;
}

LtiModel make_planar_lti(const PlanarParams& params, double dt) {
  LtiModel model;
  model.params = params;
  model.continuous = planar_model(params.mass, params.inertia);
  model.discrete = discretize_lti(model.continuous.A, model.continuous.B, dt);
  return model;
}

AxisPoles default_planar_poles() {
  return AxisPoles{{{-0.8, -1.2}, {-0.8, -1.2}, {-1.0, -1.5}}};
}

double closed_loop_abscissa(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const Eigen::MatrixXd& K) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(A - B * K, false);
  return es.eigenvalues().real().maxCoeff();
}

void require_hurwitz(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& K) {
  const double abscissa = closed_loop_abscissa(A, B, K);
  if (!(abscissa < 0.0)) {
    throw std::domain_error("closed loop A - BK is not Hurwitz (max Re = " +
                            std::to_string(abscissa) + ")");
  }
}

namespace {

FeedbackGain place_axis_poles(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                              const AxisPoles& spec) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (static_cast<Eigen::Index>(spec.poles.size()) != m) {
    throw std::invalid_argument("need one pole pair per control axis");
  }
  FeedbackGain gain{Eigen::MatrixXd::Zero(m, n)};
  std::vector<bool> covered(n, false);
  for (Eigen::Index j = 0; j < m; ++j) {
    // Acceleration row: the single row B drives for this input.
    Eigen::Index acc = -1;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (B(r, j) != 0.0) {
        if (acc >= 0) throw std::invalid_argument("input drives more than one row");
        acc = r;
      }
    }
    if (acc < 0) throw std::invalid_argument("input " + std::to_string(j) + " drives nothing");
    if (A.row(acc).cwiseAbs().maxCoeff() != 0.0) {
      throw std::invalid_argument("acceleration row must have no state coupling");
    }
    // Position row: integrates the acceleration row and nothing else.
    Eigen::Index pos = -1;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (A(r, acc) != 0.0) {
        if (pos >= 0) throw std::invalid_argument("velocity feeds more than one row");
        pos = r;
      }
    }
    if (pos < 0 || A.row(pos).cwiseAbs().sum() != std::abs(A(pos, acc))) {
      throw std::invalid_argument("axis is not a decoupled double integrator");
    }
    const double b = B(acc, j);
    const double c = A(pos, acc);
    const auto [p1, p2] = spec.poles[j];
    // s^2 + b kv s + b c kp = (s - p1)(s - p2)
    gain.K(j, acc) = -(p1 + p2) / b;
    gain.K(j, pos) = p1 * p2 / (b * c);
    covered[acc] = covered[pos] = true;
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    if (!covered[r]) throw std::invalid_argument("state " + std::to_string(r) + " not actuated");
  }
  return gain;
}

FeedbackGain solve_lqr(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                       const QuadraticWeights& w) {
  const Eigen::Index n = A.rows();
  if (w.Q.rows() != n || w.Q.cols() != n || w.R.rows() != B.cols() || w.R.cols() != B.cols()) {
    throw std::invalid_argument("LQR weight shapes do not match (A, B)");
  }
  Eigen::LLT<Eigen::MatrixXd> rllt(w.R);
  if (rllt.info() != Eigen::Success) throw std::invalid_argument("R must be positive definite");
  const Eigen::MatrixXd G = B * rllt.solve(B.transpose());

  // Stable invariant subspace of the Hamiltonian via the matrix sign function.
  Eigen::MatrixXd H(2 * n, 2 * n);
  H << A, -G, -w.Q, -A.transpose();
  Eigen::MatrixXd Z = H;
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Z);
    const double det = std::abs(lu.determinant());
    const double c = (det > 0.0 && std::isfinite(det))
                         ? std::pow(det, -1.0 / static_cast<double>(2 * n))
                         : 1.0;
    const Eigen::MatrixXd next = 0.5 * (c * Z + lu.inverse() / c);
    const double change = (next - Z).norm() / std::max(1.0, next.norm());
    Z = next;
    if (change < 1e-13) break;
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd lhs(2 * n, n);
  Eigen::MatrixXd rhs(2 * n, n);
  lhs << Z.topRightCorner(n, n), Z.bottomRightCorner(n, n) + I;
  rhs << Z.topLeftCorner(n, n) + I, Z.bottomLeftCorner(n, n);
  Eigen::MatrixXd P = lhs.colPivHouseholderQr().solve(-rhs);
  P = 0.5 * (P + P.transpose());
  return FeedbackGain{rllt.solve(B.transpose() * P)};
}

}  // namespace

FeedbackGain design_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const GainSpec& spec) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) throw std::invalid_argument("A/B shape mismatch");
  FeedbackGain gain = std::visit(
      [&](const auto& s) -> FeedbackGain {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AxisPoles>) {
          return place_axis_poles(A, B, s);
        } else {
          return solve_lqr(A, B, s);
        }
      },
      spec);
  if (!gain.K.allFinite()) throw std::domain_error("gain design produced non-finite entries");
  require_hurwitz(A, B, gain.K);
  return gain;
}

StateVec propagate_plant(const StateVec& x, const ControlVec& u, const DiscreteModel& model) {
  StateVec next = model.Fx * x + model.Fu * u;
  next[state::kPsi] = wrap_angle(next[state::kPsi]);
  return next;
}

StateVec propagate_plant(const StateVec& x, const ControlVec& u, double dt_plant,
                         const ContinuousModel& model) {
  return propagate_plant(x, u, discretize_lti(model.A, model.B, dt_plant));
}

StateVec state_difference(const StateVec& x, const StateVec& y) {
  StateVec d = x - y;
  d[state::kPsi] = wrap_angle(d[state::kPsi]);
  return d;
}

}  // namespace scate
