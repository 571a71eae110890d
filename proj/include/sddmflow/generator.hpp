#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sddmflow/errors.hpp"
#include "sddmflow/graph.hpp"
#include "sddmflow/random.hpp"

namespace sddmflow {

struct RandomNetwork {
  WeightedGraph graph;
  DirectedNetwork network;  // arc e orients graph edge e
  std::vector<double> b;    // +supply at one end of a diameter pair, -supply at the other
  NodeId source = 0;
  NodeId sink = 0;
};

struct WeightRange {
  double lo = 1.0;
  double hi = 1.0;
};

/// Connected random network: a uniformly attached random spanning tree, then
/// m - (n - 1) distinct uniform extra edges, uniform weights, coin-flip arc
/// orientation, and unit supply between a BFS double-sweep diameter pair.
///
/// Stream: one mt19937_64 seeded with `seed`, consumed in the order tree,
/// extra edges, weights, orientations (see random.hpp for the mappings).
inline RandomNetwork generate_random_network(int n, long long m, std::uint64_t seed, WeightRange weights = {},
                                             double supply = 1.0) {
  if (n < 1) throw ParameterError("generate_random_network: need n >= 1");
  const long long max_edges = static_cast<long long>(n) * (n - 1) / 2;
  if (m < n - 1 || m > max_edges) {
    throw ParameterError("generate_random_network: infeasible (n, m) = (" + std::to_string(n) + ", " +
                         std::to_string(m) + "); need n-1 <= m <= n(n-1)/2");
  }
  if (!(weights.lo > 0.0) || weights.hi < weights.lo) {
    throw ParameterError("generate_random_network: weight range must satisfy 0 < lo <= hi");
  }
  Rng rng(seed);

  std::vector<NodeId> order(n);
  for (NodeId k = 0; k < n; ++k) order[k] = k;
  rng.shuffle(order);

  auto key = [n](NodeId i, NodeId j) {
    if (i > j) std::swap(i, j);
    return static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(j);
  };
  std::vector<std::pair<NodeId, NodeId>> pairs;
  pairs.reserve(m);
  std::unordered_set<std::uint64_t> present;
  for (int idx = 1; idx < n; ++idx) {
    NodeId child = order[idx];
    NodeId parent = order[rng.below(idx)];
    pairs.emplace_back(std::min(child, parent), std::max(child, parent));
    present.insert(key(child, parent));
  }

  const long long extra = m - (n - 1);
  if (extra > 0 && 2 * m > max_edges) {
    // dense: sample without replacement from the explicit complement
    std::vector<std::pair<NodeId, NodeId>> rest;
    for (NodeId i = 0; i < n; ++i) {
      for (NodeId j = i + 1; j < n; ++j) {
        if (!present.count(key(i, j))) rest.emplace_back(i, j);
      }
    }
    for (long long t = 0; t < extra; ++t) {
      std::size_t pick = t + rng.below(rest.size() - t);
      std::swap(rest[t], rest[pick]);
      pairs.push_back(rest[t]);
    }
  } else {
    while (static_cast<long long>(pairs.size()) < m) {
      NodeId i = static_cast<NodeId>(rng.below(n));
      NodeId j = static_cast<NodeId>(rng.below(n));
      if (i == j || present.count(key(i, j))) continue;
      present.insert(key(i, j));
      pairs.emplace_back(std::min(i, j), std::max(i, j));
    }
  }

  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (const auto& [i, j] : pairs) edges.push_back({i, j, rng.uniform(weights.lo, weights.hi)});
  std::vector<Arc> arcs;
  arcs.reserve(pairs.size());
  for (const auto& [i, j] : pairs) arcs.push_back(rng.coin() ? Arc{i, j} : Arc{j, i});

  RandomNetwork out;
  out.graph = WeightedGraph(n, std::move(edges));
  out.network = DirectedNetwork(n, std::move(arcs));
  out.b.assign(n, 0.0);
  auto [u, v] = diameter_pair(out.graph);
  out.source = u;
  out.sink = v;
  if (u != v) {
    out.b[u] = supply;
    out.b[v] = -supply;
  }
  return out;
}

}  // namespace sddmflow
