#pragma once

// Shared fixtures and dense oracles for the test suites.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "sddmflow/generator.hpp"
#include "sddmflow/graph.hpp"
#include "sddmflow/random.hpp"
#include "sddmflow/split_matrix.hpp"

namespace testsupport {

using namespace sddmflow;

inline WeightedGraph path_graph(int n, double w = 1.0) {
  std::vector<Edge> edges;
  for (int k = 0; k + 1 < n; ++k) edges.push_back({k, k + 1, w});
  return WeightedGraph(n, edges);
}

inline WeightedGraph triangle(double w = 1.0) { return WeightedGraph(3, {{0, 1, w}, {1, 2, w}, {0, 2, w}}); }

/// Connected random graph with m ~ 2n edges (capped by the complete graph)
/// and weights in [1, 5].
inline WeightedGraph random_graph(int n, std::uint64_t seed, double density = 2.0) {
  long long max_edges = static_cast<long long>(n) * (n - 1) / 2;
  long long m = std::min<long long>(max_edges, std::max<long long>(n - 1, static_cast<long long>(density * n)));
  return generate_random_network(n, m, seed, {1.0, 5.0}).graph;
}

inline GroundedSystem grounded_random(int n, std::uint64_t seed, double density = 2.0) {
  SplitMatrix l = laplacian(random_graph(n, seed, density));
  return ground(l, grounding_node(l));
}

inline std::vector<double> random_vector(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline double m_norm(const Eigen::MatrixXd& m, const Eigen::VectorXd& v) { return std::sqrt(std::max(0.0, v.dot(m * v))); }

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

/// Dense random PSD matrix of rank r (full rank when r == n).
inline Eigen::MatrixXd random_psd(int n, int r, Rng& rng) {
  Eigen::MatrixXd g(n, r);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < r; ++j) g(i, j) = rng.uniform(-1.0, 1.0);
  return g * g.transpose();
}

}  // namespace testsupport
