#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "sddmflow/errors.hpp"
#include "sddmflow/split_matrix.hpp"

namespace sddmflow {

struct SpectralSummary {
  double mu_min_nonzero = 1.0;
  double mu_max = 1.0;
  double kappa = 1.0;
  bool exact = true;
};

enum class SpectralMode { exact, bound };

/// Dense verification and eigen-decompositions are restricted to this size.
inline constexpr int kOracleCap = 200;
/// Largest dimension accepted by `spectral_summary` in exact mode.
inline constexpr int kExactSpectralCap = 2000;

/// Eigenvalues below this fraction of the largest one count as zero.
inline constexpr double kNullEigenTolerance = 1e-9;

/// Condition number over the nonzero spectrum.
///
/// `exact` decomposes densely. `bound` returns n^3 Wmax/Wmin for singular
/// Laplacians and n^4 Wmax/Wmin for grounded submatrices, where the weights are
/// the off-diagonal entries together with any positive row excess (the edge to
/// the removed ground node). In bound mode mu_max is the Gershgorin bound
/// 2 max D_ii and mu_min_nonzero is mu_max / kappa.
inline SpectralSummary spectral_summary(const SplitMatrix& m, SpectralMode mode, int exact_cap = kExactSpectralCap) {
  const int n = m.size();
  if (n == 0) throw ParameterError("spectral_summary: empty matrix");
  SpectralSummary s;
  if (mode == SpectralMode::exact) {
    if (n > exact_cap) {
      throw ParameterError("spectral_summary: dimension " + std::to_string(n) + " exceeds the exact-mode cap " +
                           std::to_string(exact_cap) + "; use bound mode");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.to_dense(), Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& values = eig.eigenvalues();
    const double top = values.cwiseAbs().maxCoeff();
    s.mu_max = values.maxCoeff();
    s.mu_min_nonzero = s.mu_max;
    for (int i = 0; i < n; ++i) {
      if (std::abs(values[i]) > kNullEigenTolerance * top) {
        s.mu_min_nonzero = std::min(s.mu_min_nonzero, std::abs(values[i]));
      }
    }
    s.kappa = std::abs(s.mu_max / s.mu_min_nonzero);
    s.exact = true;
    return s;
  }
  double w_max = 0.0;
  double w_min = INFINITY;
  bool grounded = false;
  double d_max = 0.0;
  for (int i = 0; i < n; ++i) {
    d_max = std::max(d_max, m.diag(i));
    for (const RowEntry& e : m.row(i)) {
      w_max = std::max(w_max, e.value);
      w_min = std::min(w_min, e.value);
    }
    const double excess = m.row_excess(i);
    if (excess > kDominanceTolerance * m.diag(i)) {
      grounded = true;
      w_max = std::max(w_max, excess);
      w_min = std::min(w_min, excess);
    }
  }
  const double ratio = (w_max > 0.0 && std::isfinite(w_min)) ? w_max / w_min : 1.0;
  const double nn = static_cast<double>(n);
  s.kappa = std::max(1.0, (grounded ? nn * nn * nn * nn : nn * nn * nn) * ratio);
  s.mu_max = 2.0 * d_max;
  s.mu_min_nonzero = s.mu_max / s.kappa;
  s.exact = false;
  return s;
}

/// Dense Moore-Penrose pseudoinverse of a symmetric matrix via its eigenbasis.
inline Eigen::MatrixXd symmetric_pseudoinverse(const Eigen::MatrixXd& m, double rel_tol = kNullEigenTolerance) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double top = values.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(values.size());
  for (int i = 0; i < values.size(); ++i) {
    if (std::abs(values[i]) > rel_tol * top) inv[i] = 1.0 / values[i];
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace sddmflow
