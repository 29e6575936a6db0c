#include "scate/noise_model.hpp"

#include <stdexcept>

#include <Eigen/Cholesky>

namespace scate {

NoiseModel NoiseModel::from_covariance(const Eigen::MatrixXd& covariance) {
  if (covariance.rows() == 0 || covariance.rows() != covariance.cols()) {
    throw std::invalid_argument("covariance must be square and nonempty");
  }
  if (!covariance.allFinite()) throw std::invalid_argument("covariance not finite");
  const double scale = covariance.cwiseAbs().maxCoeff();
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("covariance not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("covariance not positive definite");
  }
  const Eigen::MatrixXd lower = llt.matrixL();
  Eigen::MatrixXd whitener = lower.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(covariance.rows(), covariance.cols()));
  return NoiseModel(covariance, std::move(whitener));
}

NoiseModel NoiseModel::from_sigmas(const Eigen::VectorXd& sigmas) {
  if (sigmas.size() == 0 || (sigmas.array() <= 0.0).any() || !sigmas.allFinite()) {
    throw std::invalid_argument("sigmas must be positive and finite");
  }
  Eigen::MatrixXd cov = sigmas.array().square().matrix().asDiagonal();
  Eigen::MatrixXd w = sigmas.cwiseInverse().asDiagonal();
  return NoiseModel(std::move(cov), std::move(w));
}

NoiseModel NoiseModel::isotropic(int dim, double sigma) {
  return from_sigmas(Eigen::VectorXd::Constant(dim, sigma));
}

}  // namespace scate
