#pragma once

// Centralized reference solver over the exact-squaring inverse chain:
//   D_i = D_0,   A_i D_0^{-1} = (A_0 D_0^{-1})^(2^i),
// which satisfies D_i - A_i = D_{i-1} - A_{i-1} D_{i-1}^{-1} A_{i-1} exactly.
// Levels are applied implicitly (2^i sparse products) and only materialized
// densely for verification under the oracle cap.

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sddmflow/errors.hpp"
#include "sddmflow/loewner.hpp"
#include "sddmflow/spectral.hpp"
#include "sddmflow/split_matrix.hpp"

namespace sddmflow {

/// (1/3) ln 2: the total chain budget under which preconditioned Richardson
/// converges.
inline const double kChainBudget = std::log(2.0) / 3.0;

/// d = ceil(log2(2 ln(2^{1/3} / (2^{1/3} - 1)) kappa)).
inline int chain_length(double kappa) {
  if (!(kappa >= 1.0) || !std::isfinite(kappa)) {
    throw ParameterError("chain_length: kappa must be a finite value >= 1");
  }
  const double c = std::cbrt(2.0);
  const double constant = 2.0 * std::log(c / (c - 1.0));
  return std::max(1, static_cast<int>(std::ceil(std::log2(constant * kappa))));
}

class InverseChain {
 public:
  InverseChain(SplitMatrix base, int depth, std::vector<double> epsilons, bool measured)
      : base_(std::move(base)), depth_(depth), epsilons_(std::move(epsilons)), measured_(measured) {}

  const SplitMatrix& base() const noexcept { return base_; }
  int depth() const noexcept { return depth_; }
  int size() const noexcept { return base_.size(); }

  /// Declared budgets eps_0 .. eps_d.
  const std::vector<double>& epsilons() const noexcept { return epsilons_; }
  double total_epsilon() const { return std::accumulate(epsilons_.begin(), epsilons_.end(), 0.0); }
  /// True when eps_d was measured spectrally rather than taken from the
  /// chain-length guarantee.
  bool budget_measured() const noexcept { return measured_; }

  /// One product with A_0 D_0^{-1}.
  std::vector<double> apply_AD(std::span<const double> v) const {
    std::vector<double> out(size(), 0.0);
    for (int k = 0; k < size(); ++k) {
      double s = 0.0;
      for (const RowEntry& e : base_.row(k)) s += e.value / base_.diag(e.col) * v[e.col];
      out[k] = s;
    }
    return out;
  }

  /// One product with D_0^{-1} A_0.
  std::vector<double> apply_DA(std::span<const double> v) const {
    std::vector<double> out(size(), 0.0);
    for (int k = 0; k < size(); ++k) {
      double s = 0.0;
      for (const RowEntry& e : base_.row(k)) s += e.value * v[e.col];
      out[k] = s / base_.diag(k);
    }
    return out;
  }

  /// (D_0^{-1} A_0)^(2^i), dense. Oracle use only.
  Eigen::MatrixXd dense_DA_power(int level) const {
    require_oracle_size();
    Eigen::MatrixXd q = base_.dense_D().cwiseInverse().asDiagonal() * base_.dense_A();
    for (int s = 0; s < level; ++s) q = q * q;
    return q;
  }

  Eigen::MatrixXd dense_D(int /*level*/) const {
    require_oracle_size();
    return base_.dense_D().asDiagonal();
  }

  /// A_i = D_0 (D_0^{-1} A_0)^(2^i), dense.
  Eigen::MatrixXd dense_A(int level) const { return base_.dense_D().asDiagonal() * dense_DA_power(level); }

 private:
  void require_oracle_size() const {
    if (size() > kOracleCap) {
      throw ParameterError("inverse chain: dense materialization is limited to n <= " + std::to_string(kOracleCap));
    }
  }

  SplitMatrix base_;
  int depth_;
  std::vector<double> epsilons_;
  bool measured_;
};

/// eps_d = -ln(1 - rho^(2^d)) with rho the spectral radius of
/// D^{-1/2} A D^{-1/2}: the exact factor in D_d ~ D_d - A_d for this chain.
inline double exact_chain_final_epsilon(const SplitMatrix& m, int depth) {
  const Eigen::VectorXd inv_sqrt = m.dense_D().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd s = inv_sqrt.asDiagonal() * m.dense_A() * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
  const double rho = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double power = std::pow(rho, std::ldexp(1.0, depth));
  return -std::log1p(-power);
}

enum class BudgetMode { automatic, measure, guarantee };

/// Builds the exact-squaring chain of depth d. eps_0..eps_{d-1} are zero by
/// construction; eps_d is measured spectrally when n is under the oracle cap
/// (or when asked), otherwise the chain-length guarantee (1/3) ln 2 is used.
inline InverseChain build_exact_chain(const SplitMatrix& m0, int depth, BudgetMode mode = BudgetMode::automatic) {
  if (depth < 1) throw ParameterError("build_exact_chain: chain length must be >= 1");
  if (!is_nonsingular_sddm(m0)) {
    throw ParameterError(
        "build_exact_chain: M0 is not a nonsingular SDDM matrix; ground the Laplacian first");
  }
  std::vector<double> eps(depth + 1, 0.0);
  const bool measure = mode == BudgetMode::measure || (mode == BudgetMode::automatic && m0.size() <= kOracleCap);
  eps[depth] = measure ? exact_chain_final_epsilon(m0, depth) : kChainBudget;
  return InverseChain(m0, depth, std::move(eps), measure);
}

/// Crude chain solve: forward b_i = (I + A_{i-1} D_{i-1}^{-1}) b_{i-1},
/// x_d = D_d^{-1} b_d, backward x_i = 1/2 [D_i^{-1} b_i + (I + D_i^{-1} A_i) x_{i+1}].
inline std::vector<double> parallel_r_solve(const InverseChain& chain, std::span<const double> b0) {
  const int n = chain.size();
  if (static_cast<int>(b0.size()) != n) throw ParameterError("parallel_r_solve: dimension mismatch");
  const int d = chain.depth();
  const SplitMatrix& m = chain.base();

  std::vector<std::vector<double>> b(d + 1);
  b[0].assign(b0.begin(), b0.end());
  for (int i = 1; i <= d; ++i) {
    std::vector<double> u = b[i - 1];
    const long long applications = 1LL << (i - 1);
    for (long long j = 0; j < applications; ++j) u = chain.apply_AD(u);
    b[i].resize(n);
    for (int k = 0; k < n; ++k) b[i][k] = b[i - 1][k] + u[k];
  }
  std::vector<double> x(n);
  for (int k = 0; k < n; ++k) x[k] = b[d][k] / m.diag(k);
  for (int i = d - 1; i >= 0; --i) {
    std::vector<double> eta = x;
    const long long applications = 1LL << i;
    for (long long j = 0; j < applications; ++j) eta = chain.apply_DA(eta);
    for (int k = 0; k < n; ++k) x[k] = 0.5 * (b[i][k] / m.diag(k) + x[k] + eta[k]);
  }
  return x;
}

/// Sweeps q after which preconditioned Richardson has contracted the M-norm
/// error below `eps`, given a chain with total budget `chain_epsilon`: each
/// sweep contracts by at most e^eps_total - 1.
inline int richardson_sweeps(double eps, double chain_epsilon) {
  if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("richardson_sweeps: eps must lie in (0, 1)");
  const double contraction = std::expm1(chain_epsilon);
  if (!(contraction < 1.0)) throw ParameterError("richardson_sweeps: chain budget too large to contract");
  if (contraction <= 0.0) return 1;
  return std::max(1, static_cast<int>(std::ceil(std::log(eps) / std::log(contraction))));
}

enum class RichardsonStop { residual, fixed };

struct RichardsonOptions {
  RichardsonStop stop = RichardsonStop::residual;
  int sweeps = 0;                     // for RichardsonStop::fixed
  std::optional<double> kappa_hat;    // default: bound-mode spectral summary
};

struct RichardsonResult {
  std::vector<double> x;
  int sweeps = 0;
  std::vector<double> residuals;  // ||M0 y_t - b0||_2 / ||b0||_2 after sweep t
};

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Preconditioned Richardson on the chain: y_t = y_{t-1} - Z_0 M_0 y_{t-1} + chi, chi = Z_0 b_0.
///
/// The residual policy stops once ||M_0 y - b_0|| / ||b_0|| <= eps / sqrt(kappa_hat),
/// which implies the M0-norm contract, and fails after ceil(6 ln(1/eps)) + 2
/// sweeps. The fixed policy runs exactly `sweeps` sweeps.
inline RichardsonResult parallel_e_solve(const InverseChain& chain, std::span<const double> b0, double eps,
                                         const RichardsonOptions& options = {}) {
  const int n = chain.size();
  if (static_cast<int>(b0.size()) != n) throw ParameterError("parallel_e_solve: dimension mismatch");
  if (!(eps > 0.0 && eps <= 0.5)) throw ParameterError("parallel_e_solve: eps must lie in (0, 1/2]");
  // the guarantee path declares the strict bound itself, so equality is accepted
  if (!(chain.total_epsilon() <= kChainBudget)) {
    throw ParameterError("parallel_e_solve: chain budget sum eps_i = " + std::to_string(chain.total_epsilon()) +
                         " exceeds (1/3) ln 2");
  }
  const SplitMatrix& m = chain.base();
  int cap = 0;
  double threshold = 0.0;
  if (options.stop == RichardsonStop::fixed) {
    if (options.sweeps < 1) throw ParameterError("parallel_e_solve: fixed policy needs sweeps >= 1");
    cap = options.sweeps;
  } else {
    const double kappa = options.kappa_hat ? *options.kappa_hat : spectral_summary(m, SpectralMode::bound).kappa;
    threshold = eps / std::sqrt(kappa);
    cap = static_cast<int>(std::ceil(6.0 * std::log(1.0 / eps))) + 2;
  }

  const double b_norm = norm2(b0);
  const std::vector<double> chi = parallel_r_solve(chain, b0);
  RichardsonResult result;
  std::vector<double> y(n, 0.0);
  for (int t = 1; t <= cap; ++t) {
    const std::vector<double> u1 = m.apply(y);
    const std::vector<double> u2 = parallel_r_solve(chain, u1);
    for (int k = 0; k < n; ++k) y[k] = y[k] - u2[k] + chi[k];
    std::vector<double> r = m.apply(y);
    for (int k = 0; k < n; ++k) r[k] -= b0[k];
    const double rel = b_norm > 0.0 ? norm2(r) / b_norm : 0.0;
    result.residuals.push_back(rel);
    result.sweeps = t;
    if (options.stop == RichardsonStop::residual && rel <= threshold) {
      result.x = std::move(y);
      return result;
    }
  }
  if (options.stop == RichardsonStop::residual) {
    throw ConvergenceError("parallel_e_solve: no convergence after " + std::to_string(cap) +
                               " sweeps (relative residual " + std::to_string(result.residuals.back()) +
                               "); the inverse chain is likely broken",
                           result.residuals.back());
  }
  result.x = std::move(y);
  return result;
}

struct ChainVerification {
  std::vector<double> measured;  // eps_0 .. eps_d as measured
  std::vector<int> flagged;      // levels whose measured eps exceeds the declared one
};

/// Measures the three chain conditions with the Loewner oracle:
/// eps_{i-1} from D_i - A_i ~ D_{i-1} - A_{i-1} D_{i-1}^{-1} A_{i-1} and
/// D_i ~ D_{i-1}; eps_d from D_d ~ D_d - A_d.
inline ChainVerification verify_chain(const InverseChain& chain, double slack = 1e-9) {
  const int d = chain.depth();
  ChainVerification out;
  out.measured.assign(d + 1, 0.0);
  const Eigen::MatrixXd dd = chain.dense_D(0);
  const Eigen::MatrixXd d_inv = chain.base().dense_D().cwiseInverse().asDiagonal();
  Eigen::MatrixXd prev_a = chain.dense_A(0);
  for (int i = 1; i <= d; ++i) {
    const Eigen::MatrixXd a = chain.dense_A(i);
    const Eigen::MatrixXd target = dd - prev_a * d_inv * prev_a;
    const double cond1 = loewner_approx_factor(target, dd - a).alpha;
    const double cond2 = loewner_approx_factor(chain.dense_D(i - 1), chain.dense_D(i)).alpha;
    out.measured[i - 1] = std::max(cond1, cond2);
    prev_a = a;
  }
  out.measured[d] = loewner_approx_factor(dd, dd - prev_a).alpha;
  for (int i = 0; i <= d; ++i) {
    if (out.measured[i] > chain.epsilons()[i] + slack) out.flagged.push_back(i);
  }
  return out;
}

}  // namespace sddmflow
