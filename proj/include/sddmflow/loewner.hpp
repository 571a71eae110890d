#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "sddmflow/errors.hpp"
#include "sddmflow/spectral.hpp"

namespace sddmflow {

/// X ~_alpha Y  iff  e^{-alpha} X <= Y <= e^{alpha} X in the Loewner order.
struct ApproxFactor {
  double alpha = 0.0;
};

/// Smallest alpha with X ~_alpha Y, from the generalized eigenvalues of
/// (Y, X) on the common range: alpha = max |ln lambda_i|.
inline ApproxFactor loewner_approx_factor(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                          double rel_tol = kNullEigenTolerance) {
  if (x.rows() != x.cols() || y.rows() != y.cols() || x.rows() != y.rows()) {
    throw StructuralError("loewner_approx_factor: shape mismatch");
  }
  const Eigen::Index n = x.rows();
  if (n == 0) return {};
  if (n > kOracleCap) throw ParameterError("loewner_approx_factor: dimension exceeds the oracle cap");
  const Eigen::MatrixXd xs = 0.5 * (x + x.transpose());
  const Eigen::MatrixXd ys = 0.5 * (y + y.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(xs);
  const double top_x = ex.eigenvalues().cwiseAbs().maxCoeff();
  const double top_y = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(ys, Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .cwiseAbs()
                           .maxCoeff();
  if (ex.eigenvalues().minCoeff() < -rel_tol * std::max(top_x, 1e-300)) {
    throw StructuralError("loewner_approx_factor: X is not positive semidefinite");
  }
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ex.eigenvalues()[i] > rel_tol * top_x) ++rank;
  }
  if (rank == 0) {
    if (top_y > rel_tol) throw StructuralError("loewner_approx_factor: mismatched null spaces");
    return {};
  }
  // eigenvalues are ascending: the range of X is the trailing block
  const Eigen::MatrixXd range = ex.eigenvectors().rightCols(rank);
  if (rank < n) {
    const Eigen::MatrixXd null = ex.eigenvectors().leftCols(n - rank);
    if ((ys * null).norm() > 1e-7 * std::max(top_y, 1e-300) * std::sqrt(static_cast<double>(n))) {
      throw StructuralError("loewner_approx_factor: mismatched null spaces");
    }
  }
  const Eigen::VectorXd inv_sqrt = ex.eigenvalues().tail(rank).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd pencil = inv_sqrt.asDiagonal() * (range.transpose() * ys * range) * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(0.5 * (pencil + pencil.transpose()), Eigen::EigenvaluesOnly);
  const double lo = eg.eigenvalues().minCoeff();
  const double hi = eg.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw StructuralError("loewner_approx_factor: mismatched null spaces (Y singular on range of X)");
  return {std::max(std::abs(std::log(lo)), std::abs(std::log(hi)))};
}

}  // namespace sddmflow
