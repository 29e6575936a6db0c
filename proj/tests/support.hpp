#pragma once

#include <vector>

#include <Eigen/Core>

#include "scate/factor_graph.hpp"

namespace scate::testing {

// Central differences of the raw residual, one block per key.
inline std::vector<Eigen::MatrixXd> numeric_jacobians(const Factor& f, const Values& at, double h = 1e-6) {
  std::vector<Eigen::MatrixXd> out;
  for (const Key& key : f.keys()) {
    const Eigen::VectorXd x0 = at.at(key);
    Eigen::MatrixXd j(f.dim(), x0.size());
    for (int c = 0; c < x0.size(); ++c) {
      Values plus = at;
      Values minus = at;
      Eigen::VectorXd xp = x0;
      Eigen::VectorXd xm = x0;
      xp[c] += h;
      xm[c] -= h;
      plus.update(key, xp);
      minus.update(key, xm);
      j.col(c) = (f.evaluate(plus) - f.evaluate(minus)) / (2.0 * h);
    }
    out.push_back(j);
  }
  return out;
}

inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// r = a - b, both of the same dimension.
class DiffFactor final : public Factor {
 public:
  DiffFactor(Key a, Key b, int dim, double sigma)
      : Factor({a, b}, NoiseModel::isotropic(dim, sigma), FactorTag::Dynamics) {}

  Eigen::VectorXd evaluate(const Values& v, std::vector<Eigen::MatrixXd>* j) const override {
    const int n = dim();
    if (j) {
      j->assign({Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n)});
    }
    return v.at(keys()[0]) - v.at(keys()[1]);
  }
};

// r = value - target.
class PointFactor final : public Factor {
 public:
  PointFactor(Key k, Eigen::VectorXd target, double sigma)
      : Factor({k}, NoiseModel::isotropic(static_cast<int>(target.size()), sigma), FactorTag::Start),
        target_(std::move(target)) {}

  Eigen::VectorXd evaluate(const Values& v, std::vector<Eigen::MatrixXd>* j) const override {
    if (j) j->assign({Eigen::MatrixXd::Identity(dim(), dim())});
    return v.at(keys()[0]) - target_;
  }

 private:
  Eigen::VectorXd target_;
};

}  // namespace scate::testing
