#pragma once

// Quick oracle and invariant checks on small seeded instances; backs the
// `verify` subcommand.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "sddmflow/chain.hpp"
#include "sddmflow/dist/solver.hpp"
#include "sddmflow/generator.hpp"
#include "sddmflow/loewner.hpp"
#include "sddmflow/netflow.hpp"
#include "sddmflow/optimizers.hpp"
#include "sddmflow/random.hpp"
#include "sddmflow/sim/harness.hpp"

namespace sddmflow {

struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

namespace detail {

inline GroundedSystem verify_system(int n, std::uint64_t seed) {
  const int m = std::min<long long>(2LL * n, static_cast<long long>(n) * (n - 1) / 2);
  RandomNetwork net = generate_random_network(n, m, seed, {1.0, 5.0});
  SplitMatrix l = laplacian(net.graph);
  return ground(l, grounding_node(l));
}

inline std::vector<double> verify_vector(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

inline std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline double m_norm(const Eigen::MatrixXd& m, const Eigen::VectorXd& v) { return std::sqrt(std::max(0.0, v.dot(m * v))); }

}  // namespace detail

inline std::vector<CheckResult> run_verify_suite(std::uint64_t seed, int instances = 3) {
  std::vector<CheckResult> out;
  auto sys = [&](int k) { return detail::verify_system(8 + 4 * k, seed + 101 * k); };

  {
    CheckResult c{"chain: measured eps_d below (1/3) ln 2 at chain_length(kappa)", true, ""};
    for (int k = 0; k < instances; ++k) {
      GroundedSystem s = sys(k);
      const double kappa = spectral_summary(s.matrix, SpectralMode::exact).kappa;
      const int d = chain_length(kappa);
      InverseChain ch = build_exact_chain(s.matrix, d, BudgetMode::measure);
      const Eigen::MatrixXd dd = ch.dense_D(d);
      const double eps = loewner_approx_factor(dd, Eigen::MatrixXd(dd - ch.dense_A(d))).alpha;
      if (!(eps < kChainBudget)) c.ok = false;
      c.detail += (k ? ", " : "") + std::string("eps_d=") + detail::short_num(eps);
    }
    out.push_back(c);
  }
  {
    CheckResult c{"comp: power rows match dense (A D^-1)^R, R in {1,2,4}", true, ""};
    double worst = 0.0;
    for (int k = 0; k < instances; ++k) {
      const SplitMatrix m = detail::verify_system(8 + 2 * k, seed + 7 * k).matrix;
      const Eigen::MatrixXd ad = m.dense_A() * m.dense_D().cwiseInverse().asDiagonal();
      for (int R : {1, 2, 4}) {
        Eigen::MatrixXd pw = Eigen::MatrixXd::Identity(m.size(), m.size());
        for (int i = 0; i < R; ++i) pw = pw * ad;
        auto rows = dist::comp0(dist::make_node_inputs(m, std::vector<double>(m.size(), 0.0), 1, R));
        for (const dist::PowerRow& r : rows) {
          Eigen::VectorXd dense = Eigen::VectorXd::Zero(m.size());
          for (const RowEntry& e : r.entries) dense[e.col] = e.value;
          worst = std::max(worst, (dense - pw.row(r.owner).transpose()).cwiseAbs().maxCoeff());
        }
      }
    }
    c.ok = worst <= 1e-10;
    c.detail = "max |diff| = " + detail::short_num(worst);
    out.push_back(c);
  }
  {
    CheckResult c{"dist: r_dist_r_solve equals parallel_r_solve", true, ""};
    double worst = 0.0;
    for (int k = 0; k < instances; ++k) {
      GroundedSystem s = sys(k);
      const int d = chain_length(spectral_summary(s.matrix, SpectralMode::exact).kappa);
      std::vector<double> b = detail::verify_vector(s.matrix.size(), seed + k);
      std::vector<double> ref = parallel_r_solve(build_exact_chain(s.matrix, d), b);
      for (int R : {1, 2}) {
        std::vector<double> x = dist::r_dist_r_solve(s.matrix, b, d, R).x;
        for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - ref[i]));
      }
    }
    c.ok = worst <= 1e-9;
    c.detail = "max |diff| = " + detail::short_num(worst);
    out.push_back(c);
  }
  {
    CheckResult c{"dist: e_dist_r_solve meets ||x - x*||_M <= eps ||x*||_M", true, ""};
    double worst = 0.0;
    for (int k = 0; k < instances; ++k) {
      GroundedSystem s = sys(k);
      std::vector<double> b = detail::verify_vector(s.matrix.size(), seed + 50 + k);
      for (double eps : {1e-2, 1e-4}) {
        dist::SolverPlan plan = dist::plan_solver(s.matrix, eps);
        std::vector<double> x = dist::e_dist_r_solve(s.matrix, b, eps, 1, plan).x;
        const Eigen::MatrixXd m = s.matrix.to_dense();
        const Eigen::VectorXd bx = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
        const Eigen::VectorXd xs = m.ldlt().solve(bx);
        const Eigen::VectorXd xe = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
        const double ratio = detail::m_norm(m, xe - xs) / (eps * detail::m_norm(m, xs));
        worst = std::max(worst, ratio);
      }
    }
    c.ok = worst <= 1.0;
    c.detail = "worst error / (eps ||x*||_M) = " + detail::short_num(worst);
    out.push_back(c);
  }
  {
    CheckResult c{"sim: locality audit passes for R in {1,2}", true, ""};
    GroundedSystem s = sys(1);
    std::vector<double> b = detail::verify_vector(s.matrix.size(), seed);
    dist::SolverPlan plan = dist::plan_solver(s.matrix, 1e-2);
    for (int R : {1, 2}) {
      sim::LocalityAuditor audit(s.matrix.graph(), R);
      sim::RunOptions o;
      o.keep_log = false;
      o.observer = [&](const sim::Message& msg) { audit.observe(msg); };
      dist::e_dist_r_solve(s.matrix, b, 1e-2, R, plan, o);
      if (!audit.report().ok) {
        c.ok = false;
        c.detail = audit.report().reason;
      }
    }
    out.push_back(c);
  }
  {
    CheckResult c{"netflow: dual gradient matches central differences", true, ""};
    double worst = 0.0;
    for (int k = 0; k < instances; ++k) {
      RandomNetwork net = generate_random_network(10, 20, seed + k);
      FlowProblem p = make_flow_problem(net, {CostKind::smoothed, 1.0, 10.0, 1.0}, seed + k);
      std::vector<double> l = detail::verify_vector(10, seed + 9 * k);
      std::vector<double> g = dual_gradient(p, l);
      double num = 0.0, den = 0.0;
      for (int i = 0; i < 10; ++i) {
        std::vector<double> lp = l, lm = l;
        lp[i] += 1e-5;
        lm[i] -= 1e-5;
        const double fd = (dual_value(p, lp) - dual_value(p, lm)) / 2e-5;
        num += (fd - g[i]) * (fd - g[i]);
        den += g[i] * g[i];
      }
      worst = std::max(worst, std::sqrt(num / den));
    }
    c.ok = worst <= 1e-6;
    c.detail = "worst relative error = " + detail::short_num(worst);
    out.push_back(c);
  }
  {
    CheckResult c{"optimizers: sddm-newton direction within eps in the H-norm", true, ""};
    double worst = 0.0;
    for (int k = 0; k < instances; ++k) {
      RandomNetwork net = generate_random_network(16, 34, seed + k);
      FlowProblem p = make_flow_problem(net, {CostKind::smoothed, 1.0, 10.0, 1.0}, seed + k);
      std::vector<double> l = detail::verify_vector(16, seed + 3 * k);
      const Eigen::MatrixXd h = dual_hessian(p, l).to_dense();
      std::vector<double> d = exact_newton_direction(p, l);
      std::vector<double> dt = sddm_newton_direction(p, l, 1e-4, 1).d;
      Eigen::VectorXd e(16), dv(16);
      for (int i = 0; i < 16; ++i) {
        e[i] = dt[i] - d[i];
        dv[i] = d[i];
      }
      worst = std::max(worst, detail::m_norm(h, e) / (1e-4 * detail::m_norm(h, dv)));
    }
    c.ok = worst <= 1.0;
    c.detail = "worst error / (eps ||d||_H) = " + detail::short_num(worst);
    out.push_back(c);
  }
  return out;
}

}  // namespace sddmflow
