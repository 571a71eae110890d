#pragma once

// Synchronous round-based executor for per-node programs.
//
// A node program is a coroutine `Task<T>(NodeContext&)`. In each round every
// live node runs until it calls `co_await ctx.next_round(expected)`; messages
// sent during round r are delivered as the inbox of round r + 1. Round 0 is the
// start step. Programs may `co_await` nested Task<U> sub-programs.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <coroutine>
#include <cstdio>
#include <exception>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sddmflow/errors.hpp"
#include "sddmflow/graph.hpp"

namespace sddmflow::sim {

enum class Tag : int { COMP0 = 0, COMP1, FWD_U, BWD_ETA, RICH_U1, GATHER };
inline constexpr int kTagCount = 6;

inline const char* tag_name(Tag t) {
  static constexpr const char* names[] = {"COMP0", "COMP1", "FWD_U", "BWD_ETA", "RICH_U1", "GATHER"};
  return names[static_cast<int>(t)];
}

/// Wire record. `index` addresses the datum: the column j for power-row
/// entries, the originating node for relayed vector values.
struct Message {
  int round = 0;
  NodeId src = 0;
  NodeId dst = 0;
  Tag tag = Tag::COMP0;
  int level = 0;
  int index = 0;
  double value = 0.0;

  auto key() const { return std::tie(round, src, dst, tag, level, index); }
  bool operator<(const Message& o) const { return key() < o.key(); }
};

inline std::string to_ndjson(const Message& m) {
  char value[40];
  if (std::isfinite(m.value)) {
    std::snprintf(value, sizeof value, "%.17g", m.value);
  } else {
    std::snprintf(value, sizeof value, "null");
  }
  char line[200];
  std::snprintf(line, sizeof line, R"({"round":%d,"src":%d,"dst":%d,"tag":"%s","level":%d,"index":%d,"value":%s})",
                m.round, m.src, m.dst, tag_name(m.tag), m.level, m.index, value);
  return line;
}

// ---------------------------------------------------------------- coroutines

template <class T>
class Task {
 public:
  struct promise_type {
    std::optional<T> value;
    std::exception_ptr error;
    std::coroutine_handle<> continuation;

    Task get_return_object() { return Task(std::coroutine_handle<promise_type>::from_promise(*this)); }
    std::suspend_always initial_suspend() noexcept { return {}; }
    auto final_suspend() noexcept {
      struct Final {
        bool await_ready() noexcept { return false; }
        std::coroutine_handle<> await_suspend(std::coroutine_handle<promise_type> h) noexcept {
          auto next = h.promise().continuation;
          return next ? next : std::noop_coroutine();
        }
        void await_resume() noexcept {}
      };
      return Final{};
    }
    template <class U>
    void return_value(U&& v) {
      value.emplace(std::forward<U>(v));
    }
    void unhandled_exception() { error = std::current_exception(); }
  };
  using handle = std::coroutine_handle<promise_type>;

  Task() = default;
  explicit Task(handle h) : h_(h) {}
  Task(Task&& o) noexcept : h_(std::exchange(o.h_, {})) {}
  Task& operator=(Task&& o) noexcept {
    if (this != &o) {
      if (h_) h_.destroy();
      h_ = std::exchange(o.h_, {});
    }
    return *this;
  }
  Task(const Task&) = delete;
  ~Task() {
    if (h_) h_.destroy();
  }

  bool await_ready() const noexcept { return false; }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> caller) noexcept {
    h_.promise().continuation = caller;
    return h_;
  }
  T await_resume() { return take(); }

  handle raw() const noexcept { return h_; }
  bool done() const noexcept { return !h_ || h_.done(); }
  T take() {
    if (h_.promise().error) std::rethrow_exception(h_.promise().error);
    return std::move(*h_.promise().value);
  }

 private:
  handle h_;
};

// ------------------------------------------------------------------ harness

class Engine;

class NodeContext {
 public:
  NodeId id() const noexcept { return id_; }
  int round() const noexcept;
  const WeightedGraph& topology() const noexcept { return *graph_; }
  std::span<const Neighbor> neighbors() const { return graph_->neighbors(id_); }
  int degree() const { return graph_->degree(id_); }

  void send(NodeId dst, Tag tag, int level, int index, double value);
  void send_to_neighbors(Tag tag, int level, int index, double value) {
    for (const Neighbor& nb : neighbors()) send(nb.id, tag, level, index, value);
  }

  /// Ends this node's step. Resumes next round with the delivered inbox
  /// (sorted by src, tag, level, index). Receiving fewer than `expected`
  /// messages is a protocol failure.
  auto next_round(int expected = 0) {
    struct Awaiter {
      NodeContext* ctx;
      int expected;
      bool await_ready() const noexcept { return false; }
      void await_suspend(std::coroutine_handle<> h) noexcept {
        ctx->resume_point_ = h;
        ctx->expected_ = expected;
      }
      const std::vector<Message>& await_resume() const noexcept { return ctx->inbox_; }
    };
    return Awaiter{this, expected};
  }

  const std::vector<Message>& inbox() const noexcept { return inbox_; }
  void set_phase(std::string phase) { phase_ = std::move(phase); }
  const std::string& phase() const noexcept { return phase_; }

 private:
  friend class Engine;
  NodeId id_ = 0;
  const WeightedGraph* graph_ = nullptr;
  Engine* engine_ = nullptr;
  std::coroutine_handle<> resume_point_;
  int expected_ = 0;
  std::vector<Message> inbox_;
  std::string phase_ = "start";
};

/// Message totals per wire tag.
using TagCounts = std::array<long long, kTagCount>;

struct CostReport {
  long long total_messages = 0;
  long long total_rounds = 0;
  long long precompute = 0;  // COMP0, COMP1
  long long forward = 0;     // FWD_U
  long long backward = 0;    // BWD_ETA
  long long richardson = 0;  // RICH_U1

  CostReport& operator+=(const CostReport& o) {
    total_messages += o.total_messages;
    total_rounds += o.total_rounds;
    precompute += o.precompute;
    forward += o.forward;
    backward += o.backward;
    richardson += o.richardson;
    return *this;
  }
  nlohmann::ordered_json to_json() const {
    return {{"total_messages", total_messages},
            {"total_rounds", total_rounds},
            {"precompute", precompute},
            {"forward", forward},
            {"backward", backward},
            {"richardson", richardson}};
  }
};

/// Everything about a run except the per-node outputs.
struct TranscriptLog {
  int rounds = 0;
  std::vector<Message> messages;  // empty unless RunOptions::keep_log
  std::vector<long long> steps;   // resumes per node
  TagCounts sent{};
  long long delivered = 0;
  long long undelivered = 0;  // addressed to nodes that had already finished

  void write_ndjson(std::ostream& out) const {
    for (const Message& m : messages) out << to_ndjson(m) << '\n';
  }
};

template <class T>
struct Transcript : TranscriptLog {
  std::vector<T> outputs;  // gathered outside the message accounting
};

inline CostReport message_stats(const TranscriptLog& t) {
  CostReport r;
  r.precompute = t.sent[0] + t.sent[1];
  r.forward = t.sent[2];
  r.backward = t.sent[3];
  r.richardson = t.sent[4];
  r.total_messages = r.precompute + r.forward + r.backward + r.richardson;
  r.total_rounds = t.rounds;
  return r;
}

struct RunOptions {
  bool keep_log = true;
  long long max_rounds = 50'000'000;
  std::function<void(const Message&)> observer;
};

template <class T>
using Program = std::function<Task<T>(NodeContext&)>;

class Engine {
 public:
  Engine(const WeightedGraph& g, RunOptions options) : graph_(g), options_(std::move(options)) {
    contexts_.resize(g.size());
    for (NodeId k = 0; k < g.size(); ++k) {
      contexts_[k].id_ = k;
      contexts_[k].graph_ = &graph_;
      contexts_[k].engine_ = this;
    }
  }

  template <class T>
  Transcript<T> run(const Program<T>& program) {
    const int n = graph_.size();
    std::vector<Task<T>> tasks;
    tasks.reserve(n);
    for (NodeId k = 0; k < n; ++k) {
      tasks.push_back(program(contexts_[k]));
      contexts_[k].resume_point_ = tasks.back().raw();
    }
    Transcript<T> t;
    t.steps.assign(n, 0);
    std::vector<char> finished(n, 0);
    int live = n;
    round_ = 0;
    while (true) {
      for (NodeId k = 0; k < n; ++k) {
        if (finished[k]) continue;
        ++t.steps[k];
        contexts_[k].resume_point_.resume();
        if (tasks[k].done()) {
          finished[k] = 1;
          --live;
        }
      }
      // surface failures from node programs before anything else
      for (NodeId k = 0; k < n; ++k) {
        if (finished[k] && tasks[k].raw().promise().error) std::rethrow_exception(tasks[k].raw().promise().error);
      }
      std::sort(outbox_.begin(), outbox_.end());
      for (const Message& m : outbox_) {
        ++t.sent[static_cast<int>(m.tag)];
        if (options_.observer) options_.observer(m);
        if (options_.keep_log) t.messages.push_back(m);
      }
      for (NodeId k = 0; k < n; ++k) contexts_[k].inbox_.clear();
      long long delivered_now = 0;
      for (const Message& m : outbox_) {
        if (finished[m.dst]) {
          ++t.undelivered;
        } else {
          contexts_[m.dst].inbox_.push_back(m);
          ++delivered_now;
        }
      }
      t.delivered += delivered_now;
      outbox_.clear();
      if (live == 0) break;

      for (NodeId k = 0; k < n; ++k) {
        if (finished[k]) continue;
        const NodeContext& c = contexts_[k];
        if (static_cast<int>(c.inbox_.size()) < c.expected_) {
          const std::string where = "node " + std::to_string(k) + " in phase '" + c.phase_ + "' at round " +
                                    std::to_string(round_ + 1) + " expected " + std::to_string(c.expected_) +
                                    " messages, received " + std::to_string(c.inbox_.size());
          if (delivered_now == 0) throw DeadlockError("deadlock: " + where);
          throw ProtocolError("missing message: " + where);
        }
      }
      if (++round_ >= options_.max_rounds) {
        throw DeadlockError("deadlock: no termination after " + std::to_string(options_.max_rounds) + " rounds");
      }
    }
    t.rounds = round_ + 1;
    t.outputs.reserve(n);
    for (NodeId k = 0; k < n; ++k) t.outputs.push_back(tasks[k].take());
    return t;
  }

 private:
  friend class NodeContext;
  const WeightedGraph& graph_;
  RunOptions options_;
  std::vector<NodeContext> contexts_;
  std::vector<Message> outbox_;
  int round_ = 0;
};

inline int NodeContext::round() const noexcept { return engine_->round_; }

inline void NodeContext::send(NodeId dst, Tag tag, int level, int index, double value) {
  if (dst < 0 || dst >= graph_->size()) {
    throw ProtocolError("node " + std::to_string(id_) + " addressed nonexistent node " + std::to_string(dst));
  }
  engine_->outbox_.push_back({engine_->round_, id_, dst, tag, level, index, value});
}

/// Runs `program` on every node of `graph` until all of them return.
template <class T>
Transcript<T> run(const WeightedGraph& graph, const Program<T>& program, RunOptions options = {}) {
  Engine engine(graph, std::move(options));
  return engine.run(program);
}

// ----------------------------------------------------------------- locality

struct LocalityReport {
  bool ok = true;
  std::optional<Message> first_violation;
  std::string reason;
};

/// Streaming locality audit. Every non-GATHER record must cross a topology
/// edge and carry a datum originating within R hops of its receiver. On top of
/// that, knowledge carried by COMP0/COMP1 records is taint-tracked round by
/// round: after the precomputation no node may have learned anything about a
/// node farther than R hops away.
class LocalityAuditor {
 public:
  LocalityAuditor(const WeightedGraph& g, int radius) : graph_(g), radius_(radius) {
    const int n = g.size();
    dist_.resize(n);
    knows_.assign(n, std::vector<char>(n, 0));
    pending_.assign(n, std::vector<char>(n, 0));
    for (NodeId k = 0; k < n; ++k) {
      dist_[k] = bfs_distances(g, k);
      knows_[k][k] = 1;
      pending_[k][k] = 1;
    }
  }

  void observe(const Message& m) {
    if (!report_.ok) return;
    if (m.tag == Tag::GATHER) return;
    const int n = graph_.size();
    if (m.src < 0 || m.src >= n || m.dst < 0 || m.dst >= n || !graph_.has_edge(m.src, m.dst)) {
      fail(m, "message does not traverse a topology edge");
      return;
    }
    if (m.index < 0 || m.index >= n || dist_[m.dst][m.index] < 0 || dist_[m.dst][m.index] > radius_) {
      fail(m, "datum originates beyond the R-hop neighborhood of the receiver");
      return;
    }
    if (m.tag != Tag::COMP0 && m.tag != Tag::COMP1) return;
    if (m.round != current_round_) {
      knows_ = pending_;
      current_round_ = m.round;
    }
    for (NodeId v = 0; v < n; ++v) {
      if (!knows_[m.src][v] || pending_[m.dst][v]) continue;
      if (dist_[m.dst][v] < 0 || dist_[m.dst][v] > radius_) {
        fail(m, "precomputation taint: node " + std::to_string(m.dst) + " learns about node " + std::to_string(v) +
                    " beyond R hops");
        return;
      }
      pending_[m.dst][v] = 1;
    }
  }

  const LocalityReport& report() const noexcept { return report_; }

 private:
  void fail(const Message& m, std::string reason) {
    report_.ok = false;
    report_.first_violation = m;
    report_.reason = std::move(reason);
  }

  WeightedGraph graph_;
  int radius_;
  std::vector<std::vector<int>> dist_;
  std::vector<std::vector<char>> knows_;
  std::vector<std::vector<char>> pending_;
  int current_round_ = -1;
  LocalityReport report_;
};

inline LocalityReport assert_locality(const TranscriptLog& t, const WeightedGraph& graph, int radius) {
  LocalityAuditor audit(graph, radius);
  for (const Message& m : t.messages) {
    audit.observe(m);
    if (!audit.report().ok) break;
  }
  return audit.report();
}

}  // namespace sddmflow::sim
