// sddmflow-cli: problem generation, one-shot SDDM solves, experiments and the
// quick verification suite. Exit codes: 0 success, 1 invalid input, 2 solver
// or numerical failure.

#include <CLI11.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sddmflow/bench.hpp"
#include "sddmflow/chain.hpp"
#include "sddmflow/dist/solver.hpp"
#include "sddmflow/errors.hpp"
#include "sddmflow/generator.hpp"
#include "sddmflow/io.hpp"
#include "sddmflow/netflow.hpp"
#include "sddmflow/random.hpp"
#include "sddmflow/split_matrix.hpp"
#include "sddmflow/verify.hpp"

using namespace sddmflow;
using json = nlohmann::ordered_json;

namespace {

constexpr int kDenseCheckCap = 200;

struct GenArgs {
  int n = 30;
  long long m = 70;
  std::uint64_t seed = 0;
  std::string kind = "smoothed";
  double gamma = 1.0;
  double Gamma = 10.0;
  double s = 1.0;
  double supply = 1.0;
  std::string out;
};

struct SolveArgs {
  std::string matrix;
  std::string rhs;
  double eps = 1e-6;
  int rhop = 1;
  std::string ground;
  std::optional<int> d;
  std::string out;
  std::string export_chain;
  std::uint64_t seed = 0;
};

struct BenchArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct VerifyArgs {
  std::uint64_t seed = 1;
  int instances = 3;
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    io::write_text(path, text);
  }
}

int run_gen(const GenArgs& a) {
  CostFamily costs;
  if (a.kind == "quadratic") {
    costs.kind = CostKind::quadratic;
  } else if (a.kind == "smoothed") {
    costs.kind = CostKind::smoothed;
  } else {
    throw ParameterError("gen: --kind must be quadratic or smoothed");
  }
  costs.gamma = a.gamma;
  costs.Gamma = a.Gamma;
  costs.s = a.s;
  const RandomNetwork net = generate_random_network(a.n, a.m, a.seed, {}, a.supply);
  const FlowProblem p = make_flow_problem(net, costs, a.seed);
  json j = io::flow_problem_to_json(p);
  j["seed"] = a.seed;
  j["source"] = net.source;
  j["sink"] = net.sink;
  emit(a.out, j.dump(2) + "\n");
  return 0;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

int run_solve(const SolveArgs& a, bool ground_requested) {
  const SplitMatrix m = io::read_matrix_market(std::filesystem::path(a.matrix));
  const int n = m.size();
  const SddmReport report = is_sddm(m);
  if (!report.ok) throw StructuralError("solve: matrix is not SDDM: " + report.message);

  std::vector<double> b;
  if (a.rhs.empty()) {
    Rng rng(a.seed);
    b.resize(n);
    for (double& x : b) x = rng.uniform(-1.0, 1.0);
    if (ground_requested) b = project_out_constant(b);
  } else {
    b = io::read_vector(std::filesystem::path(a.rhs));
    if (static_cast<int>(b.size()) != n) {
      throw ParameterError("solve: rhs has " + std::to_string(b.size()) + " entries, matrix is " + std::to_string(n));
    }
  }

  const bool singular = !is_nonsingular_sddm(m);
  std::optional<GroundedSystem> grounded;
  if (singular) {
    if (!ground_requested) throw ParameterError("solve: matrix is singular (a Laplacian); pass --ground [NODE]");
    double sum = 0.0;
    double mass = 0.0;
    for (double x : b) {
      sum += x;
      mass += std::abs(x);
    }
    if (std::abs(sum) > 1e-10 * std::max(1.0, mass)) {
      throw ParameterError("solve: rhs of a Laplacian system must sum to zero (sum = " + io::fmt17(sum) + ")");
    }
    NodeId g = grounding_node(m);
    if (!a.ground.empty()) {
      try {
        g = std::stoi(a.ground);
      } catch (const std::exception&) {
        throw ParameterError("solve: --ground expects a node index");
      }
      if (g < 0 || g >= n) throw ParameterError("solve: --ground node out of range");
    }
    grounded = ground(m, g);
  } else if (ground_requested) {
    throw ParameterError("solve: --ground applies to singular (Laplacian) matrices only");
  }

  const SplitMatrix& sys = grounded ? grounded->matrix : m;
  const std::vector<double> rhs = grounded ? grounded->restrict_vector(b) : b;
  const dist::SolverPlan plan = dist::plan_solver(sys, a.eps, a.d);
  sim::RunOptions options;
  options.keep_log = false;
  const dist::DistSolveResult res = dist::e_dist_r_solve(sys, rhs, a.eps, a.rhop, plan, options);
  const std::vector<double> x = grounded ? grounded->embed(res.x) : res.x;

  std::vector<double> r = m.apply(x);
  for (int i = 0; i < n; ++i) r[i] -= b[i];

  json out = {{"n", n},
              {"eps", a.eps},
              {"R", a.rhop},
              {"grounded", grounded.has_value()},
              {"ground", grounded ? json(grounded->ground) : json(nullptr)},
              {"d", plan.d},
              {"kappa", plan.kappa},
              {"kappa_exact", plan.kappa_exact},
              {"eps_d", plan.eps_d},
              {"eps_d_measured", plan.eps_d_measured},
              {"sweeps", res.sweeps},
              {"residual_norm", norm2(r)},
              {"relative_residual", norm2(r) / std::max(norm2(b), 1e-300)},
              {"cost", res.cost.to_json()}};
  if (sys.size() <= kDenseCheckCap) {
    const Eigen::MatrixXd md = sys.to_dense();
    const Eigen::VectorXd bd = Eigen::Map<const Eigen::VectorXd>(rhs.data(), sys.size());
    const Eigen::VectorXd xs = md.ldlt().solve(bd);
    const Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(res.x.data(), sys.size()) - xs;
    const double err = std::sqrt(std::max(0.0, e.dot(md * e)));
    const double ref = std::sqrt(std::max(0.0, xs.dot(md * xs)));
    out["dense_check"] = {{"error_M", err}, {"relative_error_M", err / std::max(ref, 1e-300)},
                          {"within_eps", err <= a.eps * ref}};
  }
  if (!a.export_chain.empty()) {
    const InverseChain chain = build_exact_chain(sys, plan.d, BudgetMode::measure);
    io::export_chain(a.export_chain, chain, plan.kappa, a.seed);
    out["chain_export"] = a.export_chain;
  }
  if (a.out.empty()) {
    out["x"] = x;
  } else {
    std::ostringstream os;
    io::write_vector(os, x);
    io::write_text(a.out, os.str());
    out["solution"] = a.out;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_bench(const BenchArgs& a) {
  ExperimentConfig c = load_experiment_config(a.config);
  if (!a.out.empty()) c.output_dir = a.out;
  if (a.seed) c.seed = *a.seed;
  const ExperimentResult r = run_experiment(c);
  std::cout << r.summary.dump(2) << "\n";
  return 0;
}

int run_verify(const VerifyArgs& a) {
  if (a.instances < 1) throw ParameterError("verify: --instances must be >= 1");
  bool all = true;
  for (const CheckResult& c : run_verify_suite(a.seed, a.instances)) {
    std::cout << (c.ok ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
    all = all && c.ok;
  }
  return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed SDDM solver and dual Newton network-flow experiments"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* g = app.add_subcommand("gen", "Generate a random flow problem as JSON");
  g->add_option("--n", gen.n, "Number of nodes")->capture_default_str();
  g->add_option("--m", gen.m, "Number of edges")->capture_default_str();
  g->add_option("--seed", gen.seed, "Seed for topology and costs")->capture_default_str();
  g->add_option("--kind", gen.kind, "Cost family: quadratic or smoothed")->capture_default_str();
  g->add_option("--gamma", gen.gamma, "Lower end of the cost coefficient range")->capture_default_str();
  g->add_option("--Gamma", gen.Gamma, "Upper end of the cost coefficient range")->capture_default_str();
  g->add_option("--s", gen.s, "Smoothing weight (smoothed costs)")->capture_default_str();
  g->add_option("--supply", gen.supply, "Supply at the source node")->capture_default_str();
  g->add_option("--out", gen.out, "Output file (default: stdout)");

  SolveArgs solve;
  CLI::App* s = app.add_subcommand("solve", "Solve M x = b for an SDDM matrix in Matrix Market format");
  s->add_option("--matrix", solve.matrix, "Matrix Market file")->required()->check(CLI::ExistingFile);
  s->add_option("--rhs", solve.rhs, "Right-hand side, one value per line (default: random from --seed)")
      ->check(CLI::ExistingFile);
  s->add_option("--eps", solve.eps, "Target relative error in the M-norm")->capture_default_str();
  s->add_option("--rhop", solve.rhop, "Communication radius R (power of two)")->capture_default_str();
  CLI::Option* ground_opt =
      s->add_option("--ground", solve.ground, "Ground a Laplacian at NODE (default: automatic choice)")
          ->expected(0, 1);
  s->add_option("--d", solve.d, "Override the chain length");
  s->add_option("--out", solve.out, "Write the solution here instead of into the report");
  s->add_option("--export-chain", solve.export_chain, "Write the inverse chain levels to this directory");
  s->add_option("--seed", solve.seed, "Seed for a generated rhs and the chain manifest")->capture_default_str();

  BenchArgs bench;
  CLI::App* b = app.add_subcommand("bench", "Run every configured method on one generated instance");
  b->add_option("--config", bench.config, "TOML experiment config")->required()->check(CLI::ExistingFile);
  b->add_option("--out", bench.out, "Output directory (overrides output.dir)");
  b->add_option("--seed", bench.seed, "Override the config seed");

  VerifyArgs verify;
  CLI::App* v = app.add_subcommand("verify", "Run the oracle and invariant checks on small instances");
  v->add_option("--seed", verify.seed, "Seed for the check instances")->capture_default_str();
  v->add_option("--instances", verify.instances, "Instances per check")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (g->parsed()) return run_gen(gen);
    if (s->parsed()) return run_solve(solve, ground_opt->count() > 0);
    if (b->parsed()) return run_bench(bench);
    if (v->parsed()) return run_verify(verify);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
