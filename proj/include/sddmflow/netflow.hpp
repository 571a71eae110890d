#pragma once

// Min-cost network flow through its dual.
//
// For flow x on arcs, f(x) = sum_e Phi_e(x_e) subject to A x = b (A the
// node-arc incidence matrix). The dual objective used throughout is
//   q(lambda) = sum_e [ -Phi_e(x_e(lambda)) + (A^T lambda)_e x_e(lambda) ] - lambda^T b,
// with Phi_e'(x_e(lambda)) = lambda_src(e) - lambda_dst(e). It is convex, its
// gradient is A x(lambda) - b and its Hessian A diag(1/Phi_e'') A^T; it is
// minimized, and min q = -f(x*).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sddmflow/errors.hpp"
#include "sddmflow/generator.hpp"
#include "sddmflow/graph.hpp"
#include "sddmflow/random.hpp"
#include "sddmflow/spectral.hpp"
#include "sddmflow/split_matrix.hpp"

namespace sddmflow {

enum class CostKind { quadratic, smoothed };

inline const char* cost_kind_name(CostKind k) { return k == CostKind::quadratic ? "quadratic" : "smoothed"; }

/// quadratic: (a/2) x^2 + c x.   smoothed: (a/2) x^2 + s sqrt(1 + x^2).
struct CostFunction {
  CostKind kind = CostKind::quadratic;
  double a = 1.0;
  double c = 0.0;
  double s = 0.0;

  static CostFunction quadratic(double a, double c = 0.0) { return {CostKind::quadratic, a, c, 0.0}; }
  static CostFunction smoothed(double a, double s) { return {CostKind::smoothed, a, 0.0, s}; }

  void validate() const {
    if (!(a > 0.0) || !std::isfinite(a)) throw ParameterError("cost: a must be positive");
    if (kind == CostKind::smoothed && (!(s > 0.0) || !std::isfinite(s))) {
      throw ParameterError("cost: smoothed s must be positive");
    }
    if (!std::isfinite(c)) throw ParameterError("cost: c must be finite");
  }

  double value(double x) const {
    return kind == CostKind::quadratic ? 0.5 * a * x * x + c * x : 0.5 * a * x * x + s * std::hypot(1.0, x);
  }
  double first(double x) const {
    return kind == CostKind::quadratic ? a * x + c : a * x + s * x / std::hypot(1.0, x);
  }
  double second(double x) const {
    if (kind == CostKind::quadratic) return a;
    const double r = std::hypot(1.0, x);
    return a + s / (r * r * r);
  }
  double third(double x) const {
    if (kind == CostKind::quadratic) return 0.0;
    const double r2 = 1.0 + x * x;
    return -3.0 * s * x / (r2 * r2 * std::sqrt(r2));
  }

  /// Curvature bounds gamma_e <= Phi'' <= Gamma_e.
  double curvature_min() const { return a; }
  double curvature_max() const { return kind == CostKind::quadratic ? a : a + s; }

  /// Solves Phi'(x) = t. Closed form for quadratic; safeguarded Newton inside
  /// the bracket [(t - s)/a, (t + s)/a] for smoothed.
  double inverse_derivative(double t, int edge = -1, double tol = 1e-12) const {
    if (kind == CostKind::quadratic) return (t - c) / a;
    double lo = (t - s) / a;
    double hi = (t + s) / a;
    double x = std::clamp(t / (a + s), lo, hi);
    for (int it = 0; it < 200; ++it) {
      const double f = first(x) - t;
      if (f == 0.0) return x;
      if (f > 0.0) {
        hi = x;
      } else {
        lo = x;
      }
      double next = x - f / second(x);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - x) <= tol * std::max(1.0, std::abs(x))) return next;
      x = next;
    }
    throw NumericalError("primal_from_dual: root finder did not converge on edge " + std::to_string(edge) +
                         " (target derivative " + std::to_string(t) + ")");
  }

  /// Lipschitz constant of 1/Phi'' (the curvature regularity condition, with Phi'' in the
  /// denominators): max |Phi'''| / Phi''^2, by a grid scan plus golden-section
  /// refinement. Zero for quadratic costs.
  double inverse_curvature_lipschitz() const {
    if (kind == CostKind::quadratic) return 0.0;
    auto g = [this](double x) {
      const double h = second(x);
      return std::abs(third(x)) / (h * h);
    };
    // |Phi'''| decays like |x|^-4, so the maximum sits in a bounded window
    const int steps = 4000;
    const double span = 20.0;
    double best_x = 0.0;
    double best = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double x = span * i / steps;
      if (g(x) > best) {
        best = g(x);
        best_x = x;
      }
    }
    double lo = std::max(0.0, best_x - span / steps);
    double hi = best_x + span / steps;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100; ++it) {
      const double m1 = hi - phi * (hi - lo);
      const double m2 = lo + phi * (hi - lo);
      if (g(m1) < g(m2)) {
        lo = m1;
      } else {
        hi = m2;
      }
    }
    return std::max(best, g(0.5 * (lo + hi)));
  }
};

struct FlowProblem {
  DirectedNetwork network;
  std::vector<CostFunction> costs;  // one per arc
  std::vector<double> b;            // supplies, sum zero

  int nodes() const { return network.size(); }
  int arcs() const { return network.arc_count(); }

  void validate() const {
    if (static_cast<int>(costs.size()) != network.arc_count()) {
      throw ParameterError("flow problem: need one cost per arc");
    }
    if (static_cast<int>(b.size()) != network.size()) throw ParameterError("flow problem: supply vector has wrong size");
    double sum = 0.0;
    double scale = 0.0;
    for (double v : b) {
      sum += v;
      scale += std::abs(v);
    }
    if (std::abs(sum) > 1e-12 * std::max(1.0, scale)) throw ParameterError("flow problem: supplies must sum to zero");
    for (const CostFunction& c : costs) c.validate();
    if (network.size() > 0 && !network.underlying_graph().is_connected()) {
      throw StructuralError("flow problem: network is not connected");
    }
  }
};

struct CostFamily {
  CostKind kind = CostKind::quadratic;
  double gamma = 1.0;   // a_e ~ U[gamma, Gamma]
  double Gamma = 10.0;
  double s = 1.0;       // smoothed only
};

/// Seed of the cost-coefficient stream, separate from the topology stream.
inline std::uint64_t cost_seed(std::uint64_t seed) { return seed ^ 0xC057C057C057C057ULL; }

inline FlowProblem make_flow_problem(const RandomNetwork& net, const CostFamily& family, std::uint64_t seed) {
  if (!(family.gamma > 0.0) || family.Gamma < family.gamma) {
    throw ParameterError("cost family: need 0 < gamma <= Gamma");
  }
  Rng rng(cost_seed(seed));
  FlowProblem p;
  p.network = net.network;
  p.b = net.b;
  for (int e = 0; e < net.network.arc_count(); ++e) {
    const double a = rng.uniform(family.gamma, family.Gamma);
    p.costs.push_back(family.kind == CostKind::quadratic ? CostFunction::quadratic(a) : CostFunction::smoothed(a, family.s));
  }
  p.validate();
  return p;
}

// ------------------------------------------------------------ dual machinery

inline std::vector<double> primal_from_dual(const FlowProblem& p, std::span<const double> lambda) {
  std::vector<double> x(p.arcs());
  for (int e = 0; e < p.arcs(); ++e) {
    const Arc& a = p.network.arcs()[e];
    x[e] = p.costs[e].inverse_derivative(lambda[a.src] - lambda[a.dst], e);
  }
  return x;
}

/// g_i = sum of outgoing flows - sum of incoming flows - b_i, from node i's
/// incident arcs only.
inline std::vector<double> dual_gradient_from_flow(const FlowProblem& p, std::span<const double> x) {
  std::vector<double> g(p.nodes());
  for (NodeId i = 0; i < p.nodes(); ++i) {
    double s = 0.0;
    for (const auto& inc : p.network.incident(i)) s += inc.sign * x[inc.arc];
    g[i] = s - p.b[i];
  }
  return g;
}

inline std::vector<double> dual_gradient(const FlowProblem& p, std::span<const double> lambda) {
  return dual_gradient_from_flow(p, primal_from_dual(p, lambda));
}

/// A diag(1/Phi''(x(lambda))) A^T as a weighted Laplacian.
inline SplitMatrix dual_hessian_from_flow(const FlowProblem& p, std::span<const double> x) {
  std::vector<double> w(p.arcs());
  for (int e = 0; e < p.arcs(); ++e) w[e] = 1.0 / p.costs[e].second(x[e]);
  return laplacian(p.network.underlying_graph(w));
}

inline SplitMatrix dual_hessian(const FlowProblem& p, std::span<const double> lambda) {
  return dual_hessian_from_flow(p, primal_from_dual(p, lambda));
}

inline double primal_objective(const FlowProblem& p, std::span<const double> x) {
  double f = 0.0;
  for (int e = 0; e < p.arcs(); ++e) f += p.costs[e].value(x[e]);
  return f;
}

inline double dual_value_from_flow(const FlowProblem& p, std::span<const double> lambda, std::span<const double> x) {
  double q = 0.0;
  for (int e = 0; e < p.arcs(); ++e) {
    const Arc& a = p.network.arcs()[e];
    q += -p.costs[e].value(x[e]) + (lambda[a.src] - lambda[a.dst]) * x[e];
  }
  for (NodeId i = 0; i < p.nodes(); ++i) q -= lambda[i] * p.b[i];
  return q;
}

inline double dual_value(const FlowProblem& p, std::span<const double> lambda) {
  return dual_value_from_flow(p, lambda, primal_from_dual(p, lambda));
}

/// ||A x - b||_2.
inline double feasibility(const FlowProblem& p, std::span<const double> x) {
  double s = 0.0;
  for (double v : dual_gradient_from_flow(p, x)) s += v * v;
  return std::sqrt(s);
}

/// The unweighted Laplacian A A^T of the underlying graph (parallel arcs add).
inline SplitMatrix unweighted_laplacian(const FlowProblem& p) { return laplacian(p.network.underlying_graph()); }

/// sqrt(v^T L v) after projecting out the constant direction.
inline double laplacian_seminorm(const SplitMatrix& l, std::span<const double> v) {
  const std::vector<double> w = project_out_constant(v);
  const std::vector<double> lw = l.apply(w);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * lw[i];
  return std::sqrt(std::max(0.0, s));
}

struct CurvatureBounds {
  double gamma = 1.0;
  double Gamma = 1.0;
  double delta = 0.0;
};

inline CurvatureBounds curvature_bounds(const FlowProblem& p) {
  CurvatureBounds c{INFINITY, 0.0, 0.0};
  for (const CostFunction& f : p.costs) {
    c.gamma = std::min(c.gamma, f.curvature_min());
    c.Gamma = std::max(c.Gamma, f.curvature_max());
    c.delta = std::max(c.delta, f.inverse_curvature_lipschitz());
  }
  return c;
}

/// B = mu_n(L) delta / (gamma sqrt(mu_2(L))).
inline double lipschitz_constant_B(const FlowProblem& p, const SpectralSummary& l_spectrum) {
  const CurvatureBounds c = curvature_bounds(p);
  return l_spectrum.mu_max * c.delta / (c.gamma * std::sqrt(l_spectrum.mu_min_nonzero));
}

/// Primal optimum of a quadratic-cost problem from the dense KKT system
/// (test oracle; n + m within the oracle cap scale).
inline std::vector<double> quadratic_optimum_kkt(const FlowProblem& p) {
  const int n = p.nodes();
  const int m = p.arcs();
  for (const CostFunction& c : p.costs) {
    if (c.kind != CostKind::quadratic) throw ParameterError("quadratic_optimum_kkt: quadratic costs only");
  }
  // drop one conservation row: the rows of A sum to zero
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + n - 1, m + n - 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + n - 1);
  for (int e = 0; e < m; ++e) {
    kkt(e, e) = p.costs[e].a;
    rhs[e] = -p.costs[e].c;
    const Arc& a = p.network.arcs()[e];
    for (auto [node, sign] : {std::pair{a.src, 1.0}, std::pair{a.dst, -1.0}}) {
      if (node == n - 1) continue;
      kkt(e, m + node) = sign;
      kkt(m + node, e) = sign;
    }
  }
  for (int i = 0; i < n - 1; ++i) rhs[m + i] = p.b[i];
  Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  return {sol.data(), sol.data() + m};
}

}  // namespace sddmflow
