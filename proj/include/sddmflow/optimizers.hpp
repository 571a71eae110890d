#pragma once

// Dual descent loops on q (see netflow.hpp): gradient, exact Newton,
// distributed SDDM Newton and the truncated-Neumann baseline, plus the
// constants of the three-phase convergence analysis.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sddmflow/dist/solver.hpp"
#include "sddmflow/errors.hpp"
#include "sddmflow/netflow.hpp"
#include "sddmflow/spectral.hpp"

namespace sddmflow {

enum class Method { gradient, exact_newton, sddm_newton, neumann_newton };
enum class AlphaRule { fixed, alpha_star, backtracking };
enum class Phase { strict, quadratic, terminal };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::gradient: return "gradient";
    case Method::exact_newton: return "exact-newton";
    case Method::sddm_newton: return "sddm-newton";
    case Method::neumann_newton: return "neumann-newton";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::gradient, Method::exact_newton, Method::sddm_newton, Method::neumann_newton}) {
    if (s == method_name(m)) return m;
  }
  throw ParameterError("unknown method '" + s + "' (gradient, exact-newton, sddm-newton, neumann-newton)");
}

inline const char* alpha_rule_name(AlphaRule r) {
  switch (r) {
    case AlphaRule::fixed: return "fixed";
    case AlphaRule::alpha_star: return "alpha_star";
    case AlphaRule::backtracking: return "backtracking";
  }
  return "?";
}

inline AlphaRule parse_alpha_rule(const std::string& s) {
  for (AlphaRule r : {AlphaRule::fixed, AlphaRule::alpha_star, AlphaRule::backtracking}) {
    if (s == alpha_rule_name(r)) return r;
  }
  throw ParameterError("unknown alpha rule '" + s + "' (fixed, alpha_star, backtracking)");
}

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::strict: return "strict";
    case Phase::quadratic: return "quadratic";
    case Phase::terminal: return "terminal";
  }
  return "?";
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ------------------------------------------------------------- directions

inline std::vector<double> gradient_step(const FlowProblem& p, std::span<const double> lambda, double alpha) {
  if (!(alpha > 0.0)) throw ParameterError("gradient_step: alpha must be positive");
  std::vector<double> g = dual_gradient(p, lambda);
  std::vector<double> out(lambda.begin(), lambda.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= alpha * g[i];
  return out;
}

/// -H^+ g by a dense pseudoinverse; mean zero.
inline std::vector<double> exact_newton_direction(const FlowProblem& p, std::span<const double> lambda) {
  if (p.nodes() > kOracleCap) {
    throw ParameterError("exact_newton_direction: " + std::to_string(p.nodes()) + " nodes exceeds the dense cap of " +
                         std::to_string(kOracleCap));
  }
  const std::vector<double> g = project_out_constant(dual_gradient(p, lambda));
  const Eigen::MatrixXd hp = symmetric_pseudoinverse(dual_hessian(p, lambda).to_dense());
  Eigen::VectorXd d = -(hp * Eigen::Map<const Eigen::VectorXd>(g.data(), g.size()));
  d.array() -= d.mean();
  return {d.data(), d.data() + d.size()};
}

/// Solver precision that makes the solve operator Z satisfy
/// e^{-eps^2} H^+ <= Z <= e^{eps^2} H^+ on 1-perp: 1 - e^{-eps^2}.
inline double newton_solver_precision(double eps) { return std::min(0.5, -std::expm1(-eps * eps)); }

struct NewtonSolve {
  std::vector<double> d;
  sim::CostReport cost;
  dist::SolverPlan plan;
};

/// Solves H d = -g for a weighted Laplacian H and g summing to zero: grounds
/// H at its highest-degree node, runs the distributed exact solver on the
/// grounded system, embeds with the ground coordinate at 0 and shifts to mean
/// zero. `reuse` skips planning (valid while H is unchanged).
inline NewtonSolve sddm_newton_solve(const SplitMatrix& h, std::span<const double> g, double eps, int R,
                                     const dist::SolverPlan* reuse = nullptr) {
  if (!(eps > 0.0 && eps <= 0.5)) throw ParameterError("sddm_newton_direction: eps must lie in (0, 1/2]");
  if (!dist::is_power_of_two(R)) throw ParameterError("sddm_newton_direction: R must be a power of two");
  const GroundedSystem gs = ground(h, grounding_node(h));
  std::vector<double> rhs = gs.restrict_vector(project_out_constant(g));
  for (double& v : rhs) v = -v;
  const double inner = newton_solver_precision(eps);
  NewtonSolve out;
  out.plan = reuse ? *reuse : dist::plan_solver(gs.matrix, inner);
  sim::RunOptions o;
  o.keep_log = false;
  dist::DistSolveResult r = dist::e_dist_r_solve(gs.matrix, rhs, inner, R, out.plan, o);
  out.d = project_out_constant(gs.embed(r.x));
  out.cost = r.cost;
  return out;
}

inline NewtonSolve sddm_newton_direction(const FlowProblem& p, std::span<const double> lambda, double eps, int R,
                                         const dist::SolverPlan* reuse = nullptr) {
  return sddm_newton_solve(dual_hessian(p, lambda), dual_gradient(p, lambda), eps, R, reuse);
}

/// -D^{-1} sum_{k<=N} (A D^{-1})^k g with H = D - A.
inline std::vector<double> neumann_newton_direction(const FlowProblem& p, std::span<const double> lambda, int n_terms) {
  if (n_terms < 0) throw ParameterError("neumann_newton_direction: N_terms must be >= 0");
  const SplitMatrix h = dual_hessian(p, lambda);
  std::vector<double> u = dual_gradient(p, lambda);
  std::vector<double> acc = u;
  for (int k = 0; k < n_terms; ++k) {
    for (NodeId i = 0; i < h.size(); ++i) u[i] /= h.diag(i);
    u = h.apply_A(u);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += u[i];
  }
  for (NodeId i = 0; i < h.size(); ++i) acc[i] = -acc[i] / h.diag(i);
  return acc;
}

// ---------------------------------------------------- convergence constants

struct ConvergenceConstants {
  double alpha_star = 0.0;
  double xi = 0.0;
  double zeta = 0.0;
  double eta0 = 0.0;
  double eta1 = 0.0;
  double B = 0.0;
  double gamma = 1.0;
  double Gamma = 1.0;
  double delta = 0.0;
  double mu2 = 1.0;
  double mun = 1.0;
  double eps = 0.0;

  /// eps (mu_n/mu_2) sqrt(Gamma/gamma); the analysis needs it below 1.
  double perturbation() const { return eps * mun / mu2 * std::sqrt(Gamma / gamma); }
  /// Precision window as used by the proofs: eps < (mu_2/mu_n) sqrt(gamma/Gamma).
  double window() const { return mu2 / mun * std::sqrt(gamma / Gamma); }
  /// The wider, inverted-ratio form (mu_2/mu_n) sqrt(Gamma/gamma); reported only.
  double window_inverted() const { return mu2 / mun * std::sqrt(Gamma / gamma); }
  /// Guaranteed decrement of q per strict-phase step.
  double strict_decrement() const {
    const double e2 = eps * eps;
    return 0.5 * std::exp(-2.0 * e2) / ((1.0 + eps) * (1.0 + eps)) * gamma * gamma * gamma / (Gamma * Gamma) * mu2 *
           mu2 / (mun * mun * mun * mun) * eta1 * eta1;
  }
  /// Two-term bound on ||g_{k+1}||_L for a step of size alpha in (0, 1].
  double gradient_norm_bound(double alpha, double gnorm) const {
    return (1.0 - alpha + alpha * perturbation()) * gnorm +
           alpha * alpha * B * Gamma * Gamma * (1.0 + eps) * (1.0 + eps) / (2.0 * mu2 * mu2) * gnorm * gnorm;
  }

  nlohmann::ordered_json to_json() const {
    auto num = [](double v) -> nlohmann::ordered_json {
      if (std::isfinite(v)) return v;
      return nullptr;
    };
    return {{"alpha_star", num(alpha_star)}, {"xi", num(xi)},       {"zeta", num(zeta)},   {"eta0", num(eta0)},
            {"eta1", num(eta1)},             {"B", num(B)},         {"gamma", num(gamma)}, {"Gamma", num(Gamma)},
            {"delta", num(delta)},           {"mu2", num(mu2)},     {"mun", num(mun)},     {"eps", num(eps)},
            {"window", num(window())},       {"window_inverted", num(window_inverted())}};
  }
};

/// alpha* = e^{-eps^2}/(1+eps)^2 (gamma/Gamma mu_2/mu_n)^2.
inline double optimal_step_size(const ConvergenceConstants& c) {
  if (!(c.eps > 0.0) || !(c.eps < c.window())) {
    throw ParameterError("optimal_step_size: eps = " + std::to_string(c.eps) + " outside (0, " +
                         std::to_string(c.window()) + "); the inverted-ratio window is (0, " +
                         std::to_string(c.window_inverted()) + ")");
  }
  const double r = c.gamma / c.Gamma * c.mu2 / c.mun;
  return std::exp(-c.eps * c.eps) / ((1.0 + c.eps) * (1.0 + c.eps)) * r * r;
}

inline ConvergenceConstants convergence_constants(const FlowProblem& p, double eps) {
  ConvergenceConstants c;
  const CurvatureBounds cb = curvature_bounds(p);
  const SpectralSummary s = spectral_summary(unweighted_laplacian(p), SpectralMode::exact);
  c.gamma = cb.gamma;
  c.Gamma = cb.Gamma;
  c.delta = cb.delta;
  c.mu2 = s.mu_min_nonzero;
  c.mun = s.mu_max;
  c.eps = eps;
  c.B = lipschitz_constant_B(p, s);
  c.alpha_star = optimal_step_size(c);
  c.xi = std::sqrt(1.0 - c.alpha_star + c.alpha_star * c.perturbation());
  const double ag = c.alpha_star * c.Gamma * (1.0 + eps);
  c.zeta = c.B * ag * ag / (2.0 * c.mu2 * c.mu2);
  if (c.zeta == 0.0) {
    c.eta0 = c.eta1 = std::numeric_limits<double>::infinity();
  } else {
    c.eta0 = c.xi * (1.0 - c.xi) / c.zeta;
    c.eta1 = (1.0 - c.xi) / c.zeta;
  }
  return c;
}

/// Iteration-count predictions (reported, never asserted).
struct PhasePrediction {
  double n1 = 0.0;
  std::optional<double> n2;
  double rho_terminal = 0.0;
};

inline PhasePrediction predict_phases(const ConvergenceConstants& c, double q0_minus_qstar,
                                      std::optional<double> g_first_quadratic = {}) {
  PhasePrediction out;
  const double gap = 1.0 - c.perturbation();
  const double c1 = 2.0 * c.delta * c.delta * (1.0 + c.eps) * (1.0 + c.eps) * q0_minus_qstar * c.Gamma * c.Gamma / c.gamma;
  out.n1 = c1 * c.mun * c.mun / (c.mu2 * c.mu2 * c.mu2) / (gap * gap);
  if (g_first_quadratic && std::isfinite(c.eta1)) {
    const double r = *g_first_quadratic / c.eta1;
    out.n2 = std::log2(0.5 * std::log2(1.0 - c.alpha_star * gap) / std::log2(r));
  }
  out.rho_terminal = 2.0 * gap / std::exp(-c.eps * c.eps * c.gamma * c.delta) * c.mun * std::sqrt(c.mu2);
  return out;
}

/// strict if ||g||_L >= eta1, quadratic if in [eta0, eta1), terminal below eta0.
inline Phase phase_classifier(double gnorm_l, const ConvergenceConstants& c) {
  if (gnorm_l >= c.eta1) return Phase::strict;
  if (gnorm_l >= c.eta0) return Phase::quadratic;
  return Phase::terminal;
}

// ----------------------------------------------------------------- the loop

struct OptimizerConfig {
  Method method = Method::sddm_newton;
  AlphaRule alpha_rule = AlphaRule::backtracking;
  std::optional<double> alpha;  // fixed rule; default gamma / mu_n(L) for gradient, 1 otherwise
  double eps = 1e-4;
  int R = 1;
  std::optional<int> d_override;
  double threshold = 1e-10;
  std::optional<int> max_iterations;  // default 10 n (Newton types), 10000 (gradient)
  int neumann_terms = 2;
  double armijo_c = 1e-4;
  double armijo_factor = 0.5;
  int armijo_max_halvings = 60;
  std::uint64_t seed = 0;  // recorded in the trace header only
  bool timing = false;
  std::optional<std::vector<double>> lambda0;
};

struct TraceRow {
  int k = 0;
  double q = 0.0;
  double f = 0.0;
  double feas = 0.0;
  double gnorm = 0.0;   // ||g||_2
  double gnormL = 0.0;  // ||g||_L
  Phase phase = Phase::terminal;
  double alpha = 0.0;   // step taken from this iterate (0 on the last row)
  long long messages = 0;  // cumulative
  long long rounds = 0;    // cumulative
  double ms = 0.0;
};

struct RunTrace {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<TraceRow> rows;
  ConvergenceConstants constants;
  sim::CostReport cost;
  bool converged = false;
  std::vector<double> lambda;
  std::vector<double> x;

  /// First k with ||g||_2 <= threshold.
  std::optional<int> iterations_to_threshold(double threshold) const {
    for (const TraceRow& r : rows)
      if (r.gnorm <= threshold) return r.k;
    return std::nullopt;
  }
  std::optional<int> iterations_to_feasibility(double tol) const {
    for (const TraceRow& r : rows)
      if (r.feas <= tol) return r.k;
    return std::nullopt;
  }
};

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trace_csv(std::ostream& os, const RunTrace& t) {
  for (const auto& [k, v] : t.header) os << "# " << k << '=' << v << '\n';
  os << "k,q,f,feas,gnormL,phase,messages,rounds,ms\n";
  for (const TraceRow& r : t.rows) {
    os << r.k << ',' << format_double(r.q) << ',' << format_double(r.f) << ',' << format_double(r.feas) << ','
       << format_double(r.gnormL) << ',' << phase_name(r.phase) << ',' << r.messages << ',' << r.rounds << ','
       << format_double(r.ms) << '\n';
  }
}

namespace detail {

inline bool all_quadratic(const FlowProblem& p) {
  for (const CostFunction& c : p.costs)
    if (c.kind != CostKind::quadratic) return false;
  return true;
}

}  // namespace detail

/// Iterates lambda_{k+1} = lambda_k + alpha_k d_k until ||g_k||_2 <= threshold
/// or the iteration cap. Row k describes lambda_k; messages and rounds are
/// cumulative and count one neighbour exchange of lambda per gradient, the
/// distributed solve for sddm-newton and N extra exchanges for neumann-newton.
/// The centralized exact-newton reports zero.
inline RunTrace run_optimizer(const FlowProblem& p, const OptimizerConfig& cfg) {
  p.validate();
  const int n = p.nodes();
  if (cfg.threshold <= 0.0) throw ParameterError("run_optimizer: threshold must be positive");
  if (!dist::is_power_of_two(cfg.R)) throw ParameterError("run_optimizer: R must be a power of two");
  if (!(cfg.eps > 0.0 && cfg.eps <= 0.5)) throw ParameterError("run_optimizer: eps must lie in (0, 1/2]");
  const bool newton_type = cfg.method != Method::gradient;
  const int cap = cfg.max_iterations.value_or(newton_type ? 10 * n : 10000);
  if (cap < 0) throw ParameterError("run_optimizer: iteration cap must be >= 0");

  RunTrace t;
  const SplitMatrix lap = unweighted_laplacian(p);
  const SpectralSummary ls = spectral_summary(lap, SpectralMode::exact);
  {
    // the phase constants need eps inside the window; outside it they stay
    // unset and every row is labelled terminal
    const CurvatureBounds cb = curvature_bounds(p);
    ConvergenceConstants probe;
    probe.gamma = cb.gamma;
    probe.Gamma = cb.Gamma;
    probe.mu2 = ls.mu_min_nonzero;
    probe.mun = ls.mu_max;
    probe.eps = cfg.eps;
    if (cfg.eps < probe.window()) {
      t.constants = convergence_constants(p, cfg.eps);
    } else {
      if (cfg.alpha_rule == AlphaRule::alpha_star) {
        optimal_step_size(probe);  // throws with both windows in the message
      }
      t.constants = probe;
      t.constants.eta0 = t.constants.eta1 = std::numeric_limits<double>::infinity();
    }
  }
  const ConvergenceConstants& cc = t.constants;

  double fixed_alpha = 1.0;
  if (cfg.alpha_rule == AlphaRule::fixed) {
    fixed_alpha = cfg.alpha.value_or(cfg.method == Method::gradient ? cc.gamma / ls.mu_max : 1.0);
    if (!(fixed_alpha > 0.0)) throw ParameterError("run_optimizer: fixed alpha must be positive");
  } else if (cfg.alpha_rule == AlphaRule::alpha_star) {
    fixed_alpha = cc.alpha_star;
  }

  const bool reuse_chain = cfg.method == Method::sddm_newton && detail::all_quadratic(p);
  const long long edges = static_cast<long long>(p.network.underlying_graph().edge_count());

  t.header = {{"seed", std::to_string(cfg.seed)},
              {"method", method_name(cfg.method)},
              {"eps", format_double(cfg.eps)},
              {"R", std::to_string(cfg.R)},
              {"alpha_rule", alpha_rule_name(cfg.alpha_rule)},
              {"n", std::to_string(n)},
              {"m", std::to_string(p.arcs())},
              {"gamma", format_double(cc.gamma)},
              {"Gamma", format_double(cc.Gamma)}};
  if (cfg.alpha_rule != AlphaRule::backtracking) t.header.push_back({"alpha", format_double(fixed_alpha)});
  if (cfg.method == Method::neumann_newton) t.header.push_back({"neumann_terms", std::to_string(cfg.neumann_terms)});
  if (cfg.method == Method::sddm_newton) t.header.push_back({"chain_reuse", reuse_chain ? "1" : "0"});

  std::vector<double> lambda = cfg.lambda0.value_or(std::vector<double>(n, 0.0));
  if (static_cast<int>(lambda.size()) != n) throw ParameterError("run_optimizer: lambda0 has wrong size");

  std::optional<dist::SolverPlan> plan;
  long long messages = 0;
  long long rounds = 0;
  const auto start = std::chrono::steady_clock::now();
  const double g0 = feasibility(p, primal_from_dual(p, lambda));
  int blown_up = 0;

  for (int k = 0;; ++k) {
    std::vector<double> x = primal_from_dual(p, lambda);
    std::vector<double> g = dual_gradient_from_flow(p, x);
    // each node needs its neighbours' lambda to form x on incident arcs
    messages += 2 * edges;
    rounds += 1;
    TraceRow row;
    row.k = k;
    row.q = dual_value_from_flow(p, lambda, x);
    row.f = primal_objective(p, x);
    row.gnorm = std::sqrt(dot(g, g));
    row.feas = row.gnorm;
    row.gnormL = laplacian_seminorm(lap, g);
    row.phase = phase_classifier(row.gnormL, cc);
    row.messages = messages;
    row.rounds = rounds;
    if (cfg.timing) {
      row.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    if (!std::isfinite(row.q) || !std::isfinite(row.gnorm)) {
      throw NumericalError(std::string(method_name(cfg.method)) + ": non-finite iterate at k = " + std::to_string(k));
    }
    blown_up = row.gnorm > 10.0 * g0 ? blown_up + 1 : 0;
    if (blown_up >= 50) {
      throw ConvergenceError(std::string(method_name(cfg.method)) + ": diverging, ||g|| above 10x its initial value for 50 iterations (k = " +
                                 std::to_string(k) + ")",
                             row.gnorm);
    }
    t.rows.push_back(row);
    if (row.gnorm <= cfg.threshold) {
      t.converged = true;
      break;
    }
    if (k >= cap) break;

    std::vector<double> d;
    try {
      switch (cfg.method) {
        case Method::gradient:
          d = g;
          for (double& v : d) v = -v;
          break;
        case Method::exact_newton:
          d = exact_newton_direction(p, lambda);
          break;
        case Method::sddm_newton: {
          NewtonSolve s = sddm_newton_direction(p, lambda, cfg.eps, cfg.R, plan ? &*plan : nullptr);
          if (reuse_chain) plan = s.plan;
          d = std::move(s.d);
          t.cost += s.cost;
          messages += s.cost.total_messages;
          rounds += s.cost.total_rounds;
          break;
        }
        case Method::neumann_newton:
          d = neumann_newton_direction(p, lambda, cfg.neumann_terms);
          messages += 2 * edges * cfg.neumann_terms;
          rounds += cfg.neumann_terms;
          break;
      }
    } catch (const Error&) {
      rethrow_with_context(std::string(method_name(cfg.method)) + " at iteration " + std::to_string(k) + ": ");
    }

    double alpha = fixed_alpha;
    if (cfg.alpha_rule == AlphaRule::backtracking) {
      // Armijo on q with a floor at the rounding level of q itself
      const double slope = dot(g, d);
      const double noise = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(row.q));
      alpha = 1.0;
      std::vector<double> trial(n);
      for (int h = 0;; ++h) {
        for (int i = 0; i < n; ++i) trial[i] = lambda[i] + alpha * d[i];
        const double qt = dual_value(p, trial);
        if (qt <= row.q + cfg.armijo_c * alpha * slope + noise) break;
        if (h >= cfg.armijo_max_halvings) {
          throw ConvergenceError(std::string(method_name(cfg.method)) + ": line search failed at iteration " +
                                     std::to_string(k),
                                 row.gnorm);
        }
        alpha *= cfg.armijo_factor;
      }
    }
    t.rows.back().alpha = alpha;
    for (int i = 0; i < n; ++i) lambda[i] += alpha * d[i];
  }

  t.lambda = lambda;
  t.x = primal_from_dual(p, lambda);
  t.header.push_back({"cost_report", t.cost.to_json().dump()});
  return t;
}

// ---------------------------------------------------------- phase auditing

struct PhaseAudit {
  int steps[3] = {0, 0, 0};       // audited steps per phase (strict, quadratic, terminal)
  int violations[3] = {0, 0, 0};
  double worst_excess[3] = {0.0, 0.0, 0.0};  // max (lhs - rhs) seen, may be negative
  std::string first_violation;
  bool ok() const { return violations[0] + violations[1] + violations[2] == 0; }
};

/// Checks each step k -> k+1 of an alpha* run against the inequality of the
/// phase row k is in: strict q decrement, quadratic ||g||_L^2 / eta1,
/// terminal xi ||g||_L. A step violates when lhs > rhs + slack max(1, |rhs|).
inline PhaseAudit audit_phase_bounds(const RunTrace& t, double slack = 1e-9) {
  PhaseAudit a;
  const ConvergenceConstants& c = t.constants;
  for (std::size_t k = 0; k + 1 < t.rows.size(); ++k) {
    const TraceRow& r = t.rows[k];
    const TraceRow& nx = t.rows[k + 1];
    double lhs = 0.0;
    double rhs = 0.0;
    switch (r.phase) {
      case Phase::strict:
        lhs = nx.q - r.q;
        rhs = -c.strict_decrement();
        break;
      case Phase::quadratic:
        lhs = nx.gnormL;
        rhs = r.gnormL * r.gnormL / c.eta1;
        break;
      case Phase::terminal:
        lhs = nx.gnormL;
        rhs = c.xi * r.gnormL;
        break;
    }
    const int i = static_cast<int>(r.phase);
    ++a.steps[i];
    a.worst_excess[i] = a.steps[i] == 1 ? lhs - rhs : std::max(a.worst_excess[i], lhs - rhs);
    if (lhs > rhs + slack * std::max(1.0, std::abs(rhs))) {
      if (a.violations[0] + a.violations[1] + a.violations[2] == 0) {
        a.first_violation = std::string(phase_name(r.phase)) + " step k = " + std::to_string(r.k) + ": " +
                            format_double(lhs) + " > " + format_double(rhs);
      }
      ++a.violations[i];
    }
  }
  return a;
}

/// Two-term bound on ||g_{k+1}||_L for every step with alpha_k in (0, 1].
/// Returns the number of violations beyond the same slack rule.
inline int audit_gradient_norm_recursion(const RunTrace& t, double slack = 1e-9) {
  int bad = 0;
  for (std::size_t k = 0; k + 1 < t.rows.size(); ++k) {
    const TraceRow& r = t.rows[k];
    if (!(r.alpha > 0.0 && r.alpha <= 1.0)) continue;
    const double rhs = t.constants.gradient_norm_bound(r.alpha, r.gnormL);
    if (t.rows[k + 1].gnormL > rhs + slack * std::max(1.0, rhs)) ++bad;
  }
  return bad;
}

}  // namespace sddmflow
