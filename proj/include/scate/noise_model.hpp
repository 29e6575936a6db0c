#pragma once

#include <Eigen/Core>

namespace scate {

/// Gaussian noise model with covariance S and whitener W, W^T W = S^-1.
/// W is the inverse of the lower Cholesky factor of S.
class NoiseModel {
 public:
  /// Throws std::invalid_argument if the covariance is not symmetric positive
  /// definite.
  static NoiseModel from_covariance(const Eigen::MatrixXd& covariance);
  static NoiseModel from_sigmas(const Eigen::VectorXd& sigmas);
  static NoiseModel isotropic(int dim, double sigma);

  int dim() const { return static_cast<int>(covariance_.rows()); }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::MatrixXd& whitener() const { return whitener_; }

  Eigen::VectorXd whiten(const Eigen::VectorXd& r) const { return whitener_ * r; }
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& m) const { return whitener_ * m; }
  double squared_mahalanobis(const Eigen::VectorXd& r) const {
    return (whitener_ * r).squaredNorm();
  }

 private:
  NoiseModel(Eigen::MatrixXd covariance, Eigen::MatrixXd whitener)
      : covariance_(std::move(covariance)), whitener_(std::move(whitener)) {}

  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd whitener_;
};

}  // namespace scate
