#include <gtest/gtest.h>

#include <sstream>

#include "sddmflow/dist/solver.hpp"
#include "sddmflow/sim/harness.hpp"
#include "support.hpp"

using namespace sddmflow;
using namespace sddmflow::sim;
using namespace testsupport;

namespace {

Task<double> trivial(NodeContext& ctx) { co_return static_cast<double>(ctx.id()); }

// Every node repeatedly averages with its neighbours.
Task<double> averaging(NodeContext& ctx, int rounds) {
  double v = ctx.id();
  for (int r = 0; r < rounds; ++r) {
    ctx.send_to_neighbors(Tag::FWD_U, r, ctx.id(), v);
    const auto& inbox = co_await ctx.next_round(ctx.degree());
    double s = v;
    for (const Message& m : inbox) s += m.value;
    v = s / (1 + ctx.degree());
  }
  co_return v;
}

// Negative control: node 0 talks straight to the last node.
Task<double> rogue(NodeContext& ctx) {
  if (ctx.id() == 0) ctx.send(ctx.topology().size() - 1, Tag::FWD_U, 0, 0, 1.0);
  co_await ctx.next_round();
  co_return 0.0;
}

Task<double> waits_forever(NodeContext& ctx) {
  ctx.set_phase("waiting");
  co_await ctx.next_round(ctx.id() == 1 ? 1 : 0);
  co_return 0.0;
}

Task<double> sub_step(NodeContext& ctx, double v) {
  ctx.send_to_neighbors(Tag::RICH_U1, 0, ctx.id(), v);
  const auto& inbox = co_await ctx.next_round(ctx.degree());
  double s = 0.0;
  for (const Message& m : inbox) s += m.value;
  co_return s;
}

Task<double> nested(NodeContext& ctx) {
  double a = co_await sub_step(ctx, 1.0);
  double b = co_await sub_step(ctx, a);
  co_return b;
}

Task<double> thrower(NodeContext& ctx) {
  co_await ctx.next_round();
  if (ctx.id() == 1) throw NumericalError("boom");
  co_return 0.0;
}

}  // namespace

TEST(Harness, SingleNodeTrivialProgram) {
  WeightedGraph g(1, {});
  Program<double> p = [](NodeContext& ctx) { return trivial(ctx); };
  auto t = run(g, p);
  EXPECT_EQ(t.rounds, 1);
  EXPECT_TRUE(t.messages.empty());
  EXPECT_EQ(message_stats(t).total_messages, 0);
  EXPECT_EQ(t.outputs, (std::vector<double>{0.0}));
}

TEST(Harness, EmptyTranscriptStatsAreZero) {
  TranscriptLog empty;
  CostReport r = message_stats(empty);
  EXPECT_EQ(r.total_messages, 0);
  EXPECT_EQ(r.total_rounds, 0);
  EXPECT_EQ(r.precompute + r.forward + r.backward + r.richardson, 0);
}

TEST(Harness, RoundsAndConservation) {
  WeightedGraph g = path_graph(4);
  Program<double> p = [](NodeContext& ctx) { return averaging(ctx, 3); };
  auto t = run(g, p);
  EXPECT_EQ(t.rounds, 4);
  EXPECT_EQ(static_cast<long long>(t.messages.size()), 3 * 2 * 3);
  EXPECT_EQ(t.delivered + t.undelivered, static_cast<long long>(t.messages.size()));
  EXPECT_EQ(t.undelivered, 0);
  for (std::size_t i = 1; i < t.messages.size(); ++i) EXPECT_TRUE(t.messages[i - 1] < t.messages[i]);
  int expect_round = 0;
  for (const Message& m : t.messages) {
    EXPECT_TRUE(m.round == expect_round || m.round == expect_round + 1);
    expect_round = m.round;
    EXPECT_TRUE(g.has_edge(m.src, m.dst));
  }
  CostReport r = message_stats(t);
  EXPECT_EQ(r.forward, 18);
  EXPECT_EQ(r.precompute + r.forward + r.backward + r.richardson, r.total_messages);
}

TEST(Harness, NestedTasksShareRounds) {
  WeightedGraph g = triangle();
  Program<double> p = [](NodeContext& ctx) { return nested(ctx); };
  auto t = run(g, p);
  EXPECT_EQ(t.rounds, 3);
  for (double v : t.outputs) EXPECT_DOUBLE_EQ(v, 4.0);
}

TEST(Harness, DeadlockNamesNodePhaseAndRound) {
  WeightedGraph g = path_graph(3);
  Program<double> p = [](NodeContext& ctx) { return waits_forever(ctx); };
  try {
    run(g, p);
    FAIL();
  } catch (const DeadlockError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("node 1"), std::string::npos);
    EXPECT_NE(what.find("waiting"), std::string::npos);
    EXPECT_NE(what.find("round 1"), std::string::npos);
  }
}

TEST(Harness, NodeExceptionsPropagate) {
  Program<double> p = [](NodeContext& ctx) { return thrower(ctx); };
  EXPECT_THROW(run(path_graph(3), p), NumericalError);
}

TEST(Harness, ObserverSeesEveryRecord) {
  long long seen = 0;
  RunOptions o;
  o.keep_log = false;
  o.observer = [&](const Message&) { ++seen; };
  Program<double> p = [](NodeContext& ctx) { return averaging(ctx, 5); };
  auto t = run(random_graph(12, 3), p, o);
  EXPECT_TRUE(t.messages.empty());
  EXPECT_EQ(seen, message_stats(t).total_messages);
}

TEST(Harness, NdjsonFormat) {
  Message m{3, 1, 2, Tag::BWD_ETA, 4, 5, 0.1};
  EXPECT_EQ(to_ndjson(m),
            R"({"round":3,"src":1,"dst":2,"tag":"BWD_ETA","level":4,"index":5,"value":0.10000000000000001})");
}

TEST(Locality, ValidRunPasses) {
  WeightedGraph g = random_graph(15, 4);
  Program<double> p = [](NodeContext& ctx) { return averaging(ctx, 4); };
  auto t = run(g, p);
  EXPECT_TRUE(assert_locality(t, g, 1).ok);
}

TEST(Locality, NegativeControlFails) {
  WeightedGraph g = path_graph(5);
  Program<double> p = [](NodeContext& ctx) { return rogue(ctx); };
  auto t = run(g, p);
  LocalityReport r = assert_locality(t, g, 1);
  EXPECT_FALSE(r.ok);
  ASSERT_TRUE(r.first_violation.has_value());
  EXPECT_EQ(r.first_violation->src, 0);
  EXPECT_EQ(r.first_violation->dst, 4);
}

TEST(Locality, TaintBeyondRadiusIsCaught) {
  // a COMP relay whose datum is one hop too far for R = 1
  WeightedGraph g = path_graph(4);
  TranscriptLog t;
  t.messages.push_back({0, 0, 1, Tag::COMP0, 0, 0, 1.0});
  t.messages.push_back({0, 1, 2, Tag::COMP0, 0, 1, 1.0});
  t.messages.push_back({1, 1, 2, Tag::COMP0, 1, 1, 1.0});
  LocalityReport r = assert_locality(t, g, 1);
  EXPECT_FALSE(r.ok);
  EXPECT_NE(r.reason.find("taint"), std::string::npos);
  EXPECT_TRUE(assert_locality(t, g, 2).ok);
}

TEST(Harness, CompOnP3WithR2HasOneRelayRound) {
  SplitMatrix l = laplacian(path_graph(3));
  auto in = dist::make_node_inputs(l, std::vector<double>(3, 0.0), 1, 2);
  dist::CompResult c = dist::comp_rows(in);
  int relay_rounds = 0;
  int last = -1;
  for (const Message& m : c.log.messages) {
    if (m.level >= 1 && m.round != last) {
      ++relay_rounds;
      last = m.round;
    }
  }
  EXPECT_EQ(relay_rounds, 1);
  EXPECT_TRUE(assert_locality(c.log, l.graph(), 2).ok);
}

TEST(Harness, ReplayIsByteIdentical) {
  SplitMatrix tri = ground(laplacian(triangle()), 2).matrix;
  auto in = dist::make_node_inputs(tri, std::vector<double>{1.0, 0.0}, 3, 1);
  auto a = dist::r_dist_r_solve(in, {.keep_log = true});
  auto b = dist::r_dist_r_solve(in, {.keep_log = true});
  std::ostringstream sa, sb;
  a.log.write_ndjson(sa);
  b.log.write_ndjson(sb);
  EXPECT_FALSE(sa.str().empty());
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.x, b.x);
}
