#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "scate/factor_graph.hpp"

namespace scate {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  std::string detail;
};

/// A factor plus a generator of linearization points for it. `near_kink`
/// flags points where the residual is not differentiable.
struct JacobianCase {
  std::string name;
  FactorPtr factor;
  std::function<Values(std::mt19937_64&)> sample;
  std::function<bool(const Values&)> near_kink = [](const Values&) { return false; };
};

/// Largest relative Frobenius error between analytic and central-difference
/// Jacobians over the factor's keys.
double jacobian_error(const Factor& factor, const Values& point, double step = 1e-6);

CheckResult check_jacobian(const JacobianCase& c, int samples = 100, double step = 1e-6,
                           double tol = 1e-5, std::uint64_t seed = 7);

/// One case per factor tag.
std::vector<JacobianCase> default_jacobian_cases();

/// Every suite: Jacobians for the given cases, tag coverage, kink
/// subgradients, hinge properties, dense-oracle equivalence, discretization
/// and Hurwitz checks.
std::vector<CheckResult> run_verification(std::span<const JacobianCase> cases);
std::vector<CheckResult> run_verification();

}  // namespace scate
