#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sddmflow/bench.hpp"
#include "sddmflow/chain.hpp"
#include "sddmflow/io.hpp"
#include "sddmflow/spectral.hpp"
#include "sddmflow/verify.hpp"
#include "support.hpp"

using namespace sddmflow;
using namespace testsupport;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sddmflow_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.name = "tiny";
  c.n = 12;
  c.m = 24;
  c.seed = 5;
  c.costs = {CostKind::smoothed, 1.0, 10.0, 1.0};
  return c;
}

}  // namespace

// ------------------------------------------------------------------ config

TEST(Config, ParsesEveryKey) {
  const ExperimentConfig c = parse_experiment_config(R"(
name = "x"
seed = 3
[network]
n = 20
m = 40
supply = 2.5
[costs]
kind = "quadratic"
gamma = 2
Gamma = 4.5
[solver]
eps = 1e-3
R = 2
d = 5
[run]
methods = ["sddm-newton", "gradient"]
alpha_rule = "fixed"
gradient_alpha_rule = "backtracking"
gradient_alpha = 0.01
threshold = 1e-8
newton_cap = 17
gradient_cap = 123
neumann_terms = 3
feasibility_target = 1e-2
timing = true
[output]
dir = "out"
)");
  EXPECT_EQ(c.name, "x");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.n, 20);
  EXPECT_EQ(c.m, 40);
  EXPECT_DOUBLE_EQ(c.supply, 2.5);
  EXPECT_EQ(c.costs.kind, CostKind::quadratic);
  EXPECT_DOUBLE_EQ(c.costs.gamma, 2.0);
  EXPECT_DOUBLE_EQ(c.costs.Gamma, 4.5);
  EXPECT_DOUBLE_EQ(c.eps, 1e-3);
  EXPECT_EQ(c.R, 2);
  ASSERT_TRUE(c.d_override.has_value());
  EXPECT_EQ(*c.d_override, 5);
  ASSERT_EQ(c.methods.size(), 2u);
  EXPECT_EQ(c.methods[0], Method::sddm_newton);
  EXPECT_EQ(c.methods[1], Method::gradient);
  EXPECT_EQ(c.alpha_rule, AlphaRule::fixed);
  EXPECT_EQ(c.gradient_alpha_rule, AlphaRule::backtracking);
  EXPECT_DOUBLE_EQ(*c.gradient_alpha, 0.01);
  EXPECT_DOUBLE_EQ(c.threshold, 1e-8);
  EXPECT_EQ(*c.newton_cap, 17);
  EXPECT_EQ(c.gradient_cap, 123);
  EXPECT_EQ(c.neumann_terms, 3);
  EXPECT_DOUBLE_EQ(c.feasibility_target, 1e-2);
  EXPECT_TRUE(c.timing);
  EXPECT_EQ(c.output_dir, "out");
  EXPECT_NO_THROW(c.validate());

  const OptimizerConfig g = c.optimizer_config(Method::gradient);
  EXPECT_EQ(g.alpha_rule, AlphaRule::backtracking);
  EXPECT_EQ(*g.max_iterations, 123);
  const OptimizerConfig s = c.optimizer_config(Method::sddm_newton);
  EXPECT_EQ(s.alpha_rule, AlphaRule::fixed);
  EXPECT_EQ(*s.max_iterations, 17);
  EXPECT_EQ(s.R, 2);
}

TEST(Config, DefaultsWhenEmpty) {
  const ExperimentConfig c = parse_experiment_config("");
  EXPECT_EQ(c.methods.size(), 4u);
  EXPECT_EQ(c.optimizer_config(Method::exact_newton).max_iterations, 10 * c.n);
  EXPECT_EQ(c.optimizer_config(Method::gradient).max_iterations, 10000);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ShippedConfigsLoadAndValidate) {
  for (const char* name : {"small", "large"}) {
    const ExperimentConfig c = load_experiment_config(std::filesystem::path(SDDMFLOW_SOURCE_DIR) / "configs" /
                                                      (std::string(name) + ".toml"));
    EXPECT_EQ(c.name, name);
    EXPECT_EQ(c.costs.kind, CostKind::smoothed);
    EXPECT_EQ(c.methods.size(), 4u);
    EXPECT_NO_THROW(c.validate());
  }
}

TEST(Config, RejectsInvalidInput) {
  EXPECT_THROW(parse_experiment_config("[network]\nn = 10\nm = 8\n").validate(), ParameterError);
  EXPECT_THROW(parse_experiment_config("[network]\nn = 5\nm = 11\n").validate(), ParameterError);
  EXPECT_THROW(parse_experiment_config("[solver]\nR = 3\n").validate(), ParameterError);
  EXPECT_THROW(parse_experiment_config("[solver]\neps = 0.9\n").validate(), ParameterError);
  EXPECT_THROW(parse_experiment_config("[costs]\ngamma = 5\nGamma = 1\n").validate(), ParameterError);
  EXPECT_THROW(parse_experiment_config("[costs]\nkind = \"cubic\"\n"), ParameterError);
  EXPECT_THROW(parse_experiment_config("[run]\nmethods = [\"newton\"]\n"), ParameterError);
  EXPECT_THROW(parse_experiment_config("[run]\nmethods = []\n").validate(), ParameterError);
  EXPECT_THROW(parse_experiment_config("[network]\nn = \"ten\"\n"), ParameterError);
  EXPECT_THROW(parse_experiment_config("seed = -1\n"), ParameterError);
  EXPECT_THROW(parse_experiment_config("this is not toml ["), ParameterError);
  EXPECT_THROW(load_experiment_config("/nonexistent/config.toml"), ParameterError);
}

// -------------------------------------------------------------- experiment

TEST(Experiment, WritesOneCsvPerMethodAndSummary) {
  ExperimentConfig c = tiny_config();
  const auto dir = scratch("shape");
  c.output_dir = dir.string();
  const ExperimentResult r = run_experiment(c);
  ASSERT_EQ(r.outcomes.size(), 4u);
  for (const char* m : {"exact-newton", "sddm-newton", "neumann-newton", "gradient"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / (std::string(m) + ".csv"))) << m;
    EXPECT_TRUE(r.summary["methods"].contains(m)) << m;
  }
  const auto summary = io::read_json(dir / "summary.json");
  EXPECT_EQ(summary["n"], 12);
  EXPECT_EQ(summary["m"], 24);
  EXPECT_EQ(summary["seed"], 5);
  EXPECT_TRUE(summary.contains("constants"));

  // Every CSV: header comments, then the column line, then rows numbered from 0.
  const std::string csv = slurp(dir / "sddm-newton.csv");
  std::istringstream in(csv);
  std::string line;
  int k = -1;
  bool columns = false;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      EXPECT_FALSE(columns);
      continue;
    }
    if (!columns) {
      EXPECT_EQ(line, "k,q,f,feas,gnormL,phase,messages,rounds,ms");
      columns = true;
      continue;
    }
    EXPECT_EQ(std::stoi(line.substr(0, line.find(','))), ++k);
  }
  EXPECT_TRUE(columns);
  EXPECT_EQ(k, r.find(Method::sddm_newton)->trace.rows.back().k);
}

TEST(Experiment, SummaryAgreesWithTraces) {
  const ExperimentResult r = run_experiment(tiny_config());
  for (const MethodOutcome& o : r.outcomes) {
    const auto& s = r.summary["methods"][std::string(method_name(o.method))];
    const RunTrace& t = o.trace;
    std::optional<int> first;
    for (const TraceRow& row : t.rows) {
      if (row.gnorm <= 1e-10) {
        first = row.k;
        break;
      }
    }
    if (first) {
      EXPECT_EQ(s["iterations_to_threshold"], *first);
    } else {
      EXPECT_TRUE(s["iterations_to_threshold"].is_null());
    }
    EXPECT_EQ(s["iterations"], t.rows.back().k);
    EXPECT_EQ(s["messages"], t.rows.back().messages);
  }
  EXPECT_TRUE(r.find(Method::exact_newton)->trace.converged);
  EXPECT_TRUE(r.find(Method::sddm_newton)->trace.converged);
}

TEST(Experiment, ByteIdenticalAcrossRuns) {
  ExperimentConfig c = tiny_config();
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  c.output_dir = a.string();
  run_experiment(c);
  c.output_dir = b.string();
  run_experiment(c);
  for (const char* f : {"exact-newton.csv", "sddm-newton.csv", "neumann-newton.csv", "gradient.csv", "summary.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Experiment, SeedChangesInstance) {
  ExperimentConfig c = tiny_config();
  c.methods = {Method::exact_newton};
  const ExperimentResult x = run_experiment(c);
  c.seed = 6;
  const ExperimentResult y = run_experiment(c);
  EXPECT_NE(x.find(Method::exact_newton)->csv, y.find(Method::exact_newton)->csv);
}

TEST(Experiment, ErrorNamesExperimentAndMethod) {
  ExperimentConfig c = tiny_config();
  c.methods = {Method::gradient};
  c.gradient_alpha = 1e6;
  try {
    run_experiment(c);
    FAIL() << "expected a divergence or non-finite iterate";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("experiment 'tiny', method gradient"), std::string::npos);
  }
}

// ----------------------------------------------------------------------- io

TEST(MatrixMarket, RoundTripIsExact) {
  const GroundedSystem s = grounded_random(15, 3);
  std::ostringstream os;
  io::write_matrix_market(os, s.matrix);
  std::istringstream in(os.str());
  const SplitMatrix back = io::read_matrix_market(in);
  EXPECT_EQ((back.to_dense() - s.matrix.to_dense()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MatrixMarket, ReadsGeneralStorageAndComments) {
  std::istringstream in(
      "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 4\n1 1 2\n1 2 -1\n2 1 -1\n2 2 3\n");
  const Eigen::MatrixXd m = io::read_matrix_market(in).to_dense();
  EXPECT_DOUBLE_EQ(m(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(m(0, 1), -1.0);
  EXPECT_DOUBLE_EQ(m(1, 1), 3.0);
}

TEST(MatrixMarket, RejectsMalformedInput) {
  auto bad = [](const std::string& text) {
    std::istringstream in(text);
    return io::read_matrix_market(in);
  };
  EXPECT_THROW(bad("not a header\n"), Error);
  EXPECT_THROW(bad("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 -1\n2 1 -2\n"), Error);
  EXPECT_THROW(bad("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 -1\n"), Error);
  EXPECT_THROW(bad("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 1\n2 1 0.5\n2 2 1\n"),
               StructuralError);
}

TEST(Vectors, RoundTripIsExact) {
  const std::vector<double> v = random_vector(9, 4);
  std::ostringstream os;
  io::write_vector(os, v);
  std::istringstream in("# rhs\n" + os.str());
  EXPECT_EQ(io::read_vector(in), v);
}

TEST(FlowProblemJson, RoundTripPreservesDual) {
  const FlowProblem p = make_experiment_problem(tiny_config());
  const FlowProblem back = io::flow_problem_from_json(nlohmann::json::parse(io::flow_problem_to_json(p).dump()));
  ASSERT_EQ(back.arcs(), p.arcs());
  const std::vector<double> l = random_vector(p.nodes(), 8);
  EXPECT_EQ(dual_value(back, l), dual_value(p, l));
  EXPECT_EQ(dual_gradient(back, l), dual_gradient(p, l));
}

TEST(FlowProblemJson, RejectsWrongFormatOrVersion) {
  nlohmann::json j = io::flow_problem_to_json(make_experiment_problem(tiny_config()));
  nlohmann::json wrong_version = j;
  wrong_version["version"] = 99;
  EXPECT_THROW(io::flow_problem_from_json(wrong_version), ParameterError);
  j.erase("format");
  EXPECT_THROW(io::flow_problem_from_json(j), ParameterError);
}

TEST(ChainExport, ImportRebuildsSameSolve) {
  const GroundedSystem s = grounded_random(12, 9);
  const double kappa = spectral_summary(s.matrix, SpectralMode::exact).kappa;
  const InverseChain chain = build_exact_chain(s.matrix, chain_length(kappa), BudgetMode::measure);
  const auto dir = scratch("chain");
  io::export_chain(dir, chain, kappa, 9);
  const io::ChainBundle b = io::import_chain(dir);
  EXPECT_EQ(b.d, chain.depth());
  EXPECT_EQ(b.epsilons, chain.epsilons());
  EXPECT_EQ(b.seed, 9u);
  ASSERT_EQ(static_cast<int>(b.levels.size()), chain.depth() + 1);
  for (int i = 0; i <= chain.depth(); ++i) {
    // The file stores the lower triangle; the dense level is symmetric only to round-off.
    const Eigen::MatrixXd lower = Eigen::MatrixXd(chain.dense_D(i) - chain.dense_A(i)).triangularView<Eigen::Lower>();
    const Eigen::MatrixXd want = lower + Eigen::MatrixXd(lower.triangularView<Eigen::StrictlyLower>()).transpose();
    EXPECT_LE((b.levels[i] - want).cwiseAbs().maxCoeff(), 0.0) << "level " << i;
  }
  const std::vector<double> rhs = random_vector(s.matrix.size(), 2);
  EXPECT_LE(max_abs_diff(parallel_r_solve(b.chain(), rhs), parallel_r_solve(chain, rhs)), 1e-12);
}

TEST(ChainExport, MissingLevelIsReported) {
  const GroundedSystem s = grounded_random(8, 1);
  const InverseChain chain = build_exact_chain(s.matrix, 2);
  const auto dir = scratch("chain_missing");
  io::export_chain(dir, chain, 10.0, 1);
  std::filesystem::remove(dir / "level_1.mtx");
  EXPECT_THROW(io::import_chain(dir), ParameterError);
}

// ------------------------------------------------------------------ verify

TEST(VerifySuite, AllChecksPass) {
  for (const CheckResult& c : run_verify_suite(2024, 2)) EXPECT_TRUE(c.ok) << c.name << ": " << c.detail;
}
