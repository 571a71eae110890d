#include <gtest/gtest.h>

#include "sddmflow/chain.hpp"
#include "sddmflow/dist/solver.hpp"
#include "support.hpp"

using namespace sddmflow;
using namespace sddmflow::dist;
using namespace testsupport;

namespace {

Eigen::MatrixXd dense_power(const Eigen::MatrixXd& base, int p) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(base.rows(), base.cols());
  for (int k = 0; k < p; ++k) out = out * base;
  return out;
}

double row_error(const std::vector<PowerRow>& rows, const Eigen::MatrixXd& oracle) {
  double worst = 0.0;
  for (const PowerRow& r : rows) {
    Eigen::VectorXd dense = Eigen::VectorXd::Zero(oracle.cols());
    for (const RowEntry& e : r.entries) dense[e.col] = e.value;
    worst = std::max(worst, (dense - oracle.row(r.owner).transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

SplitMatrix grounded_triangle() { return ground(laplacian(triangle()), 2).matrix; }

}  // namespace

TEST(Comp, ROneReturnsOneHopRows) {
  SplitMatrix m = laplacian(random_graph(8, 1));
  auto in = make_node_inputs(m, std::vector<double>(8, 0.0), 1, 1);
  CompResult c = comp_rows(in);
  const Eigen::MatrixXd dinv = m.dense_D().cwiseInverse().asDiagonal();
  EXPECT_LE(row_error(c.c0, m.dense_A() * dinv), 1e-15);
  EXPECT_LE(row_error(c.c1, dinv * m.dense_A()), 1e-15);
  EXPECT_EQ(message_stats(c.log).precompute, 2 * static_cast<long long>(m.graph().edge_count()));
}

TEST(Comp, SingleEdgeSquareIsIdentity) {
  SplitMatrix m = laplacian(WeightedGraph(2, {{0, 1, 1.0}}));
  auto rows = comp0(make_node_inputs(m, std::vector<double>(2, 0.0), 1, 2));
  for (const PowerRow& r : rows) {
    ASSERT_EQ(r.entries.size(), 1u);
    EXPECT_EQ(r.entries[0].col, r.owner);
    EXPECT_DOUBLE_EQ(r.entries[0].value, 1.0);
  }
}

TEST(Comp, MatchesDensePowers) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SplitMatrix m = laplacian(random_graph(10, seed));
    const Eigen::MatrixXd dinv = m.dense_D().cwiseInverse().asDiagonal();
    for (int R : {2, 4}) {
      CompResult c = comp_rows(make_node_inputs(m, std::vector<double>(10, 0.0), 1, R));
      EXPECT_LE(row_error(c.c0, dense_power(m.dense_A() * dinv, R)), 1e-10);
      EXPECT_LE(row_error(c.c1, dense_power(dinv * m.dense_A(), R)), 1e-10);
      for (const PowerRow& r : c.c0) {
        auto ball = r_hop_neighborhood(m.graph(), r.owner, R);
        for (const RowEntry& e : r.entries) {
          EXPECT_TRUE(std::binary_search(ball.begin(), ball.end(), e.col));
          EXPECT_GE(e.value, 0.0);
        }
      }
    }
  }
}

TEST(Comp, Comp1IsSimilarityOfComp0) {
  SplitMatrix m = laplacian(random_graph(9, 12));
  CompResult c = comp_rows(make_node_inputs(m, std::vector<double>(9, 0.0), 1, 4));
  for (int k = 0; k < 9; ++k) {
    ASSERT_EQ(c.c0[k].entries.size(), c.c1[k].entries.size());
    for (std::size_t e = 0; e < c.c0[k].entries.size(); ++e) {
      const int j = c.c0[k].entries[e].col;
      const double expect = c.c0[k].entries[e].value / m.diag(k) * m.diag(j);
      EXPECT_NEAR(c.c1[k].entries[e].value, expect, 1e-12);
    }
  }
}

TEST(RDist, DiagonalSystem) {
  SplitMatrix m({2.0, 4.0, 8.0}, std::span<const OffDiagonal>{});
  auto r = r_dist_r_solve(m, std::vector<double>{2.0, 2.0, 2.0}, 3, 1);
  EXPECT_EQ(r.x, (std::vector<double>{1.0, 0.5, 0.25}));
  EXPECT_EQ(r.cost.total_messages, 0);
}

TEST(RDist, OneByOne) {
  SplitMatrix m({1.0}, std::span<const OffDiagonal>{});
  auto r = r_dist_r_solve(m, std::vector<double>{1.0}, 2, 1);
  EXPECT_DOUBLE_EQ(r.x[0], 1.0);
}

TEST(RDist, TriangleMatchesReference) {
  SplitMatrix m = grounded_triangle();
  const int d = chain_length(spectral_summary(m, SpectralMode::exact).kappa);
  std::vector<double> b{1.0, 0.0};
  auto r = r_dist_r_solve(m, b, d, 1);
  auto ref = parallel_r_solve(build_exact_chain(m, d), b);
  EXPECT_LE(max_abs_diff(r.x, ref), 1e-10);
}

TEST(RDist, RandomSystemsMatchReferenceForSeveralR) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    GroundedSystem s = grounded_random(16, seed);
    const int d = chain_length(spectral_summary(s.matrix, SpectralMode::exact).kappa);
    std::vector<double> b = random_vector(15, seed + 9);
    auto ref = parallel_r_solve(build_exact_chain(s.matrix, d), b);
    for (int R : {1, 2, 4, 8}) {
      auto r = r_dist_r_solve(s.matrix, b, d, R, {.keep_log = true});
      EXPECT_LE(max_abs_diff(r.x, ref), 1e-10) << "R=" << R;
      EXPECT_TRUE(sim::assert_locality(r.log, r.topology, R).ok) << "R=" << R;
    }
  }
}

TEST(RDist, ForwardMessagesTrack2dOverR) {
  GroundedSystem s = grounded_random(14, 6);
  std::vector<double> b = random_vector(13, 1);
  const long long edges = static_cast<long long>(s.matrix.graph().edge_count());
  for (int d = 2; d <= 7; ++d) {
    auto r = r_dist_r_solve(s.matrix, b, d, 1);
    // R = 1: one message per directed edge per application, 2^d - 1 applications
    EXPECT_EQ(r.cost.forward, 2 * edges * ((1LL << d) - 1));
    EXPECT_EQ(r.cost.backward, 2 * edges * ((1LL << d) - 1));
  }
}

TEST(RDist, InconsistentConfigurationRejected) {
  SplitMatrix m = grounded_triangle();
  auto in = make_node_inputs(m, std::vector<double>{1.0, 0.0}, 3, 1);
  in[1].d = 4;
  EXPECT_THROW(r_dist_r_solve(in), ConfigurationError);
  in = make_node_inputs(m, std::vector<double>{1.0, 0.0}, 3, 3);
  EXPECT_THROW(r_dist_r_solve(in), ConfigurationError);
  in = make_node_inputs(m, std::vector<double>{1.0, 0.0}, 3, 1);
  in[0].row[0].value = 0.5;
  EXPECT_THROW(r_dist_r_solve(in), ConfigurationError);
}

TEST(EDist, DiagonalExactAfterFirstSweep) {
  SplitMatrix m({2.0, 5.0}, std::span<const OffDiagonal>{});
  for (double eps : {0.5, 1e-3}) {
    auto in = make_node_inputs(m, std::vector<double>{1.0, 1.0}, 2, 1, eps, 1);
    auto r = e_dist_r_solve(in);
    EXPECT_EQ(r.x, (std::vector<double>{0.5, 0.2}));
  }
}

TEST(EDist, TriangleMeetsContract) {
  SplitMatrix m = grounded_triangle();
  SolverPlan plan = plan_solver(m, 1e-6);
  auto r = e_dist_r_solve(m, std::vector<double>{1.0, 0.0}, 1e-6, 1, plan);
  const Eigen::MatrixXd dense = m.to_dense();
  const Eigen::VectorXd exact = dense.ldlt().solve(Eigen::VectorXd::Unit(2, 0));
  EXPECT_LE(m_norm(dense, to_eigen(r.x) - exact), 1e-6 * m_norm(dense, exact));
}

TEST(EDist, ThirtyNodeMatchesCentralizedRichardson) {
  GroundedSystem s = grounded_random(30, 2, 70.0 / 30.0);
  std::vector<double> b = random_vector(29, 4);
  SolverPlan plan = plan_solver(s.matrix, 1e-4);
  auto r = e_dist_r_solve(s.matrix, b, 1e-4, 1, plan);
  RichardsonResult ref = parallel_e_solve(build_exact_chain(s.matrix, plan.d), b, 1e-4,
                                          {RichardsonStop::fixed, plan.sweeps, {}});
  EXPECT_LE(max_abs_diff(r.x, ref.x), 1e-9);
}

TEST(EDist, BrokenBudgetIsDiagnosed) {
  std::vector<Edge> edges;
  for (int k = 0; k + 1 < 40; ++k) edges.push_back({k, k + 1, 1.0});
  GroundedSystem s = ground(laplacian(WeightedGraph(40, edges)), 0);
  std::vector<double> b(39, 0.0);
  b[38] = 1.0;
  // d = 1 with a single sweep cannot meet eps = 1e-6
  auto in = make_node_inputs(s.matrix, b, 1, 1, 1e-6, 1);
  try {
    e_dist_r_solve(in);
    FAIL();
  } catch (const ConvergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("node"), std::string::npos);
  }
}

TEST(EDist, LocalityAuditOnFullRun) {
  GroundedSystem s = grounded_random(20, 8);
  std::vector<double> b = random_vector(19, 3);
  SolverPlan plan = plan_solver(s.matrix, 1e-2);
  for (int R : {1, 2}) {
    sim::LocalityAuditor audit(s.matrix.graph(), R);
    sim::RunOptions o;
    o.keep_log = false;
    o.observer = [&](const sim::Message& m) { audit.observe(m); };
    auto r = e_dist_r_solve(s.matrix, b, 1e-2, R, plan, o);
    EXPECT_TRUE(audit.report().ok) << audit.report().reason;
    sim::CostReport c = r.cost;
    EXPECT_EQ(c.precompute + c.forward + c.backward + c.richardson, c.total_messages);
  }
}
