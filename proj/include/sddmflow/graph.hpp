#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sddmflow/errors.hpp"

namespace sddmflow {

using NodeId = int;

struct Edge {
  NodeId i = 0;
  NodeId j = 0;
  double w = 1.0;
};

struct Neighbor {
  NodeId id = 0;
  double w = 0.0;
};

/// Undirected, positively weighted, simple graph with sorted adjacency lists.
///
/// Construction rejects self-loops, non-positive weights, out-of-range ids and
/// duplicate edges. Connectivity is not enforced here; generators guarantee
/// it and ingestion paths check `is_connected()` where it matters.
class WeightedGraph {
 public:
  WeightedGraph() = default;

  WeightedGraph(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
    if (n < 0) throw ParameterError("graph: negative node count");
    for (const Edge& e : edges_) {
      if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n) {
        throw StructuralError("graph: edge endpoint out of range (" + std::to_string(e.i) + ", " +
                              std::to_string(e.j) + ")");
      }
      if (e.i == e.j) throw StructuralError("graph: self-loop at node " + std::to_string(e.i));
      if (!(e.w > 0.0) || !std::isfinite(e.w)) {
        throw StructuralError("graph: edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                              ") has non-positive weight");
      }
    }
    std::vector<int> degree(n, 0);
    for (const Edge& e : edges_) {
      ++degree[e.i];
      ++degree[e.j];
    }
    offsets_.assign(n + 1, 0);
    for (int k = 0; k < n; ++k) offsets_[k + 1] = offsets_[k] + degree[k];
    adjacency_.resize(offsets_[n]);
    std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
    for (const Edge& e : edges_) {
      adjacency_[fill[e.i]++] = {e.j, e.w};
      adjacency_[fill[e.j]++] = {e.i, e.w};
    }
    for (int k = 0; k < n; ++k) {
      auto first = adjacency_.begin() + offsets_[k];
      auto last = adjacency_.begin() + offsets_[k + 1];
      std::sort(first, last, [](const Neighbor& a, const Neighbor& b) { return a.id < b.id; });
      for (auto it = first; it + 1 < last; ++it) {
        if (it->id == (it + 1)->id) {
          throw StructuralError("graph: duplicate edge (" + std::to_string(k) + ", " +
                                std::to_string(it->id) + ")");
        }
      }
    }
  }

  int size() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  std::span<const Neighbor> neighbors(NodeId k) const {
    return {adjacency_.data() + offsets_[k], adjacency_.data() + offsets_[k + 1]};
  }

  int degree(NodeId k) const { return offsets_[k + 1] - offsets_[k]; }

  int max_degree() const {
    int d = 0;
    for (int k = 0; k < n_; ++k) d = std::max(d, degree(k));
    return d;
  }

  bool has_edge(NodeId i, NodeId j) const {
    if (i < 0 || i >= n_ || j < 0 || j >= n_) return false;
    auto row = neighbors(i);
    return std::binary_search(row.begin(), row.end(), Neighbor{j, 0.0},
                              [](const Neighbor& a, const Neighbor& b) { return a.id < b.id; });
  }

  double weight(NodeId i, NodeId j) const {
    auto row = neighbors(i);
    auto it = std::lower_bound(row.begin(), row.end(), j,
                               [](const Neighbor& a, NodeId id) { return a.id < id; });
    return (it != row.end() && it->id == j) ? it->w : 0.0;
  }

  bool is_connected() const;

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<int> offsets_{0};
  std::vector<Neighbor> adjacency_;
};

/// Hop distances from `source`; unreachable nodes get -1.
inline std::vector<int> bfs_distances(const WeightedGraph& g, NodeId source, int max_hops = -1) {
  std::vector<int> dist(g.size(), -1);
  std::deque<NodeId> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    if (max_hops >= 0 && dist[u] >= max_hops) continue;
    for (const Neighbor& nb : g.neighbors(u)) {
      if (dist[nb.id] < 0) {
        dist[nb.id] = dist[u] + 1;
        queue.push_back(nb.id);
      }
    }
  }
  return dist;
}

inline bool WeightedGraph::is_connected() const {
  if (n_ <= 1) return true;
  auto dist = bfs_distances(*this, 0);
  return std::none_of(dist.begin(), dist.end(), [](int d) { return d < 0; });
}

/// The ball N_R(k) = {v : dist(k, v) <= R}, sorted by id. Includes k.
inline std::vector<NodeId> r_hop_neighborhood(const WeightedGraph& g, NodeId k, int radius) {
  if (radius < 0) throw ParameterError("r_hop_neighborhood: negative radius");
  if (k < 0 || k >= g.size()) throw ParameterError("r_hop_neighborhood: node out of range");
  auto dist = bfs_distances(g, k, radius);
  std::vector<NodeId> ball;
  for (NodeId v = 0; v < g.size(); ++v) {
    if (dist[v] >= 0) ball.push_back(v);
  }
  return ball;
}

/// Upper bound beta = min{n, (dmax^(R+1) - 1) / (dmax - 1)} on |N_R(k)|.
inline double r_hop_size_bound(int n, int max_degree, int radius) {
  if (max_degree == 0) return std::min<double>(n, 1.0);
  if (max_degree == 1) return std::min<double>(n, radius + 1.0);  // limit of the geometric sum
  const double geometric =
      (std::pow(static_cast<double>(max_degree), radius + 1) - 1.0) / (max_degree - 1.0);
  return std::min<double>(n, geometric);
}

/// Endpoints of a BFS double sweep: a far-apart pair whose distance estimates
/// diam(G) from below. Ties resolve to the lowest node id.
inline std::pair<NodeId, NodeId> diameter_pair(const WeightedGraph& g) {
  if (g.size() == 0) throw ParameterError("diameter_pair: empty graph");
  auto farthest = [&](NodeId from) {
    auto dist = bfs_distances(g, from);
    NodeId best = from;
    for (NodeId v = 0; v < g.size(); ++v) {
      if (dist[v] > dist[best]) best = v;
    }
    return best;
  };
  NodeId u = farthest(0);
  NodeId v = farthest(u);
  return {u, v};
}

inline int estimate_diameter(const WeightedGraph& g) {
  auto [u, v] = diameter_pair(g);
  return bfs_distances(g, u)[v];
}

struct Arc {
  NodeId src = 0;
  NodeId dst = 0;
};

/// Directed network with node-arc incidence: arc e contributes +1 at its
/// source and -1 at its destination.
class DirectedNetwork {
 public:
  struct Incidence {
    int arc = 0;
    int sign = 0;
  };

  DirectedNetwork() = default;

  DirectedNetwork(int n, std::vector<Arc> arcs) : n_(n), arcs_(std::move(arcs)) {
    if (n < 0) throw ParameterError("network: negative node count");
    incident_.assign(n, {});
    for (int e = 0; e < static_cast<int>(arcs_.size()); ++e) {
      const Arc& a = arcs_[e];
      if (a.src < 0 || a.src >= n || a.dst < 0 || a.dst >= n) {
        throw StructuralError("network: arc " + std::to_string(e) + " endpoint out of range");
      }
      if (a.src == a.dst) throw StructuralError("network: arc " + std::to_string(e) + " is a self-loop");
      incident_[a.src].push_back({e, +1});
      incident_[a.dst].push_back({e, -1});
    }
  }

  int size() const noexcept { return n_; }
  int arc_count() const noexcept { return static_cast<int>(arcs_.size()); }
  const std::vector<Arc>& arcs() const noexcept { return arcs_; }
  const std::vector<Incidence>& incident(NodeId k) const { return incident_[k]; }

  /// A x for a flow vector x (net outflow per node).
  std::vector<double> apply_incidence(std::span<const double> x) const {
    std::vector<double> out(n_, 0.0);
    for (int e = 0; e < arc_count(); ++e) {
      out[arcs_[e].src] += x[e];
      out[arcs_[e].dst] -= x[e];
    }
    return out;
  }

  /// The underlying undirected graph; parallel and antiparallel arcs merge and
  /// their weights add. `arc_weight` defaults to 1 per arc.
  WeightedGraph underlying_graph(std::span<const double> arc_weight = {}) const {
    std::vector<Edge> merged;
    merged.reserve(arcs_.size());
    for (int e = 0; e < arc_count(); ++e) {
      NodeId i = std::min(arcs_[e].src, arcs_[e].dst);
      NodeId j = std::max(arcs_[e].src, arcs_[e].dst);
      merged.push_back({i, j, arc_weight.empty() ? 1.0 : arc_weight[e]});
    }
    std::sort(merged.begin(), merged.end(), [](const Edge& a, const Edge& b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    std::vector<Edge> out;
    for (const Edge& e : merged) {
      if (!out.empty() && out.back().i == e.i && out.back().j == e.j) {
        out.back().w += e.w;
      } else {
        out.push_back(e);
      }
    }
    return WeightedGraph(n_, std::move(out));
  }

 private:
  int n_ = 0;
  std::vector<Arc> arcs_;
  std::vector<std::vector<Incidence>> incident_;
};

}  // namespace sddmflow
