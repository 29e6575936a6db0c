#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "scate/factor_graph.hpp"

namespace scate {

enum class OrderingMethod {
  MinimumDegree,  ///< greedy minimum degree on the variable graph
  Natural,        ///< sorted key order
};

/// Elimination order over every graph variable. Minimum degree counts scalar
/// columns of neighbouring variables; ties go to the lowest key.
std::vector<Key> compute_ordering(const FactorGraph& graph,
                                  OrderingMethod method = OrderingMethod::MinimumDegree);

struct VariableSlot {
  int offset = 0;
  int dim = 0;
};

struct FactorRows {
  FactorId id;
  int offset = 0;
  int dim = 0;
};

/// Whitened Gauss-Newton system J delta ~= -r. Columns follow `ordering`.
struct LinearSystem {
  std::vector<Key> ordering;
  std::map<Key, VariableSlot> slots;
  std::vector<FactorRows> rows;
  Eigen::SparseMatrix<double> jacobian;
  Eigen::VectorXd residual;

  int num_columns() const { return static_cast<int>(jacobian.cols()); }
  int num_rows() const { return static_cast<int>(jacobian.rows()); }
  double error() const { return 0.5 * residual.squaredNorm(); }
};

class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(FactorId id, const std::string& what)
      : std::runtime_error(what), id_(id) {}
  FactorId factor() const { return id_; }

 private:
  FactorId id_;
};

class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

LinearSystem linearize(const FactorGraph& graph, const Values& lin_point,
                       const std::vector<Key>& ordering);
LinearSystem linearize(const FactorGraph& graph, const Values& lin_point);

enum class DampingMode {
  Isotropic,  ///< lambda * I
  Marquardt,  ///< lambda * diag(J^T J), floored for empty columns
};

enum class LinearSolver {
  RowSpace,  ///< Cholesky of J D^-1 J^T + I; Cholesky of J^T J when undamped
  QR,        ///< sparse QR of [J; sqrt(D)], better conditioned
  Cholesky,  ///< sparse Cholesky of the damped normal equations
};

struct SolveOptions {
  DampingMode damping = DampingMode::Isotropic;
  LinearSolver solver = LinearSolver::RowSpace;
  int refine = 0;  ///< iterated-Tikhonov passes reusing the factorization
};

/// Minimizes ||J delta + r||^2 + lambda * ||D^(1/2) delta||^2, eliminating
/// columns in system order. Refinement passes pull the result toward the
/// undamped minimum-norm step.
Increment solve_linear(const LinearSystem& system, double lambda = 0.0, const SolveOptions& options = {});

/// Same solve, returned as a flat vector in column order.
Eigen::VectorXd solve_linear_flat(const LinearSystem& system, double lambda = 0.0,
                                  const SolveOptions& options = {});

Increment unflatten(const LinearSystem& system, const Eigen::VectorXd& delta);

}  // namespace scate
