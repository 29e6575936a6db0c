#pragma once

#include <stdexcept>

#include "scate/factor_graph.hpp"
#include "scate/linear_system.hpp"

namespace scate {

struct LmConfig {
  int max_iters = 100;
  double lambda_init = 1e-5;
  double lambda_scale = 10.0;
  double lambda_min = 1e-7;
  double lambda_max = 1e12;
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int refine_passes = 2;  ///< iterated-Tikhonov passes per trial step
  DampingMode damping = DampingMode::Isotropic;
  LinearSolver solver = LinearSolver::RowSpace;
  OrderingMethod ordering = OrderingMethod::MinimumDegree;
};

struct LmStats {
  int iterations = 0;     ///< accepted steps
  int linear_solves = 0;  ///< accepted + rejected trial steps
  double initial_error = 0.0;
  double final_error = 0.0;
  bool converged = false;
};

struct LmResult {
  Values values;
  LmStats stats;
};

/// Raised when the objective turns non-finite; carries the last iterate whose
/// error was finite.
class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, Values last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  const Values& last_good() const { return last_good_; }

 private:
  Values last_good_;
};

/// Levenberg-Marquardt on the whitened least-squares objective. Keys in
/// `initial` that no graph variable references are carried through untouched.
LmResult optimize_lm(const FactorGraph& graph, const Values& initial, const LmConfig& config = {});

}  // namespace scate
