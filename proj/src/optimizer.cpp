#include "scate/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace scate {

LmResult optimize_lm(const FactorGraph& graph, const Values& initial, const LmConfig& config) {
  for (const Key& key : graph.variables()) {
    if (!initial.contains(key)) throw MissingKeyError(key);
  }
  LmResult result{initial, {}};
  Values& values = result.values;
  LmStats& stats = result.stats;

  double err = total_error(graph, values);
  if (!std::isfinite(err)) throw OptimizationError("initial error is not finite", values);
  stats.initial_error = err;
  stats.final_error = err;
  if (graph.empty() || err < config.abs_tol) {
    stats.converged = true;
    return result;
  }

  const std::vector<Key> ordering = compute_ordering(graph, config.ordering);
  double lambda = config.lambda_init;

  while (stats.iterations < config.max_iters) {
    LinearSystem sys;
    try {
      sys = linearize(graph, values, ordering);
    } catch (const NonFiniteError& e) {
      throw OptimizationError(e.what(), values);
    }

    bool accepted = false;
    bool stationary = false;
    Values candidate;
    double candidate_err = err;
    while (!accepted) {
      if (lambda > config.lambda_max) break;
      Eigen::VectorXd delta;
      try {
        delta = solve_linear_flat(sys, lambda, {config.damping, config.solver, config.refine_passes});
      } catch (const SingularSystemError&) {
        lambda *= config.lambda_scale;
        if (lambda > config.lambda_max) throw;
        continue;
      }
      ++stats.linear_solves;

      const double model_err = 0.5 * (sys.residual + sys.jacobian * delta).squaredNorm();
      if (err - model_err <= config.rel_tol * err) {
        stationary = true;
        break;
      }
      candidate = values.retract(unflatten(sys, delta));
      candidate_err = total_error(graph, candidate);
      if (!std::isfinite(candidate_err)) {
        throw OptimizationError("error became non-finite during iteration", values);
      }
      if (candidate_err < err) {
        accepted = true;
      } else {
        lambda *= config.lambda_scale;
      }
    }

    if (!accepted) {
      stats.converged = stationary;
      break;
    }

    const double previous = err;
    values = std::move(candidate);
    err = candidate_err;
    ++stats.iterations;
    lambda = std::max(lambda / config.lambda_scale, config.lambda_min);
    if (err < config.abs_tol || previous - err < config.rel_tol * previous) {
      stats.converged = true;
      break;
    }
  }
  stats.final_error = err;
  return result;
}

}  // namespace scate
