#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sddmflow/errors.hpp"
#include "sddmflow/graph.hpp"

namespace sddmflow {

struct RowEntry {
  NodeId col = 0;
  double value = 0.0;
};

struct OffDiagonal {
  NodeId i = 0;
  NodeId j = 0;
  double a = 0.0;  // A_ij = A_ji = -M_ij >= 0
};

/// An SDDM candidate stored as its standard splitting M = D - A.
///
/// D is a positive diagonal and A a symmetric non-negative matrix with zero
/// diagonal, held as sorted rows (row k is exactly what node k knows about
/// M). Diagonal dominance is *not* enforced here; see `is_sddm`.
class SplitMatrix {
 public:
  SplitMatrix() = default;

  /// Each unordered pair may appear once in `off`; zero entries are dropped.
  SplitMatrix(std::vector<double> diag, std::span<const OffDiagonal> off) : diag_(std::move(diag)) {
    const int n = size();
    for (int i = 0; i < n; ++i) {
      if (!(diag_[i] > 0.0) || !std::isfinite(diag_[i])) {
        throw StructuralError("split matrix: D_" + std::to_string(i) + " is not positive");
      }
    }
    std::vector<int> count(n, 0);
    for (const OffDiagonal& e : off) {
      if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n) throw StructuralError("split matrix: index out of range");
      if (e.i == e.j) throw StructuralError("split matrix: A must have a zero diagonal");
      if (e.a < 0.0 || !std::isfinite(e.a)) {
        throw StructuralError("split matrix: A_" + std::to_string(e.i) + "," + std::to_string(e.j) +
                              " is negative (positive off-diagonal in M)");
      }
      if (e.a == 0.0) continue;
      ++count[e.i];
      ++count[e.j];
    }
    offsets_.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + count[i];
    entries_.resize(offsets_[n]);
    std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
    for (const OffDiagonal& e : off) {
      if (e.a == 0.0) continue;
      entries_[fill[e.i]++] = {e.j, e.a};
      entries_[fill[e.j]++] = {e.i, e.a};
    }
    for (int i = 0; i < n; ++i) {
      auto first = entries_.begin() + offsets_[i];
      auto last = entries_.begin() + offsets_[i + 1];
      std::sort(first, last, [](const RowEntry& a, const RowEntry& b) { return a.col < b.col; });
      for (auto it = first; it + 1 < last; ++it) {
        if (it->col == (it + 1)->col) throw StructuralError("split matrix: duplicate off-diagonal entry");
      }
    }
  }

  /// Splits a dense symmetric matrix. Requires positive diagonal and
  /// non-positive off-diagonals.
  static SplitMatrix from_dense(const Eigen::MatrixXd& m, double sym_tol = 1e-12) {
    if (m.rows() != m.cols()) throw StructuralError("split matrix: input is not square");
    const int n = static_cast<int>(m.rows());
    std::vector<double> diag(n);
    std::vector<OffDiagonal> off;
    for (int i = 0; i < n; ++i) {
      diag[i] = m(i, i);
      for (int j = i + 1; j < n; ++j) {
        const double scale = std::max({1.0, std::abs(m(i, j)), std::abs(m(j, i))});
        if (std::abs(m(i, j) - m(j, i)) > sym_tol * scale) throw StructuralError("split matrix: input is not symmetric");
        if (m(i, j) > 0.0) throw StructuralError("split matrix: positive off-diagonal entry");
        if (m(i, j) != 0.0) off.push_back({i, j, -m(i, j)});
      }
    }
    return SplitMatrix(std::move(diag), off);
  }

  int size() const noexcept { return static_cast<int>(diag_.size()); }
  double diag(NodeId i) const { return diag_[i]; }
  const std::vector<double>& diagonal() const noexcept { return diag_; }

  /// Off-diagonal row i of A (positive values), sorted by column.
  std::span<const RowEntry> row(NodeId i) const {
    return {entries_.data() + offsets_[i], entries_.data() + offsets_[i + 1]};
  }

  std::size_t nonzero_off_diagonals() const noexcept { return entries_.size(); }

  double row_sum_A(NodeId i) const {
    double s = 0.0;
    for (const RowEntry& e : row(i)) s += e.value;
    return s;
  }

  /// D_ii - sum_j A_ij: zero for Laplacian rows, positive for grounded ones.
  double row_excess(NodeId i) const { return diag_[i] - row_sum_A(i); }

  double entry_A(NodeId i, NodeId j) const {
    auto r = row(i);
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const RowEntry& a, NodeId c) { return a.col < c; });
    return (it != r.end() && it->col == j) ? it->value : 0.0;
  }

  std::vector<double> apply_A(std::span<const double> v) const {
    std::vector<double> out(size(), 0.0);
    for (int i = 0; i < size(); ++i) {
      double s = 0.0;
      for (const RowEntry& e : row(i)) s += e.value * v[e.col];
      out[i] = s;
    }
    return out;
  }

  /// M v = D v - A v.
  std::vector<double> apply(std::span<const double> v) const {
    std::vector<double> out = apply_A(v);
    for (int i = 0; i < size(); ++i) out[i] = diag_[i] * v[i] - out[i];
    return out;
  }

  Eigen::MatrixXd dense_A() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size(), size());
    for (int i = 0; i < size(); ++i) {
      for (const RowEntry& e : row(i)) a(i, e.col) = e.value;
    }
    return a;
  }

  Eigen::VectorXd dense_D() const {
    return Eigen::Map<const Eigen::VectorXd>(diag_.data(), size());
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd m = -dense_A();
    for (int i = 0; i < size(); ++i) m(i, i) = diag_[i];
    return m;
  }

  /// The communication topology: edge (i, j) with weight A_ij.
  WeightedGraph graph() const {
    std::vector<Edge> edges;
    for (int i = 0; i < size(); ++i) {
      for (const RowEntry& e : row(i)) {
        if (e.col > i) edges.push_back({i, e.col, e.value});
      }
    }
    return WeightedGraph(size(), std::move(edges));
  }

  std::vector<OffDiagonal> off_diagonals() const {
    std::vector<OffDiagonal> out;
    for (int i = 0; i < size(); ++i) {
      for (const RowEntry& e : row(i)) {
        if (e.col > i) out.push_back({i, e.col, e.value});
      }
    }
    return out;
  }

 private:
  std::vector<double> diag_;
  std::vector<int> offsets_{0};
  std::vector<RowEntry> entries_;
};

struct SddmReport {
  bool ok = true;
  std::vector<int> violating_rows;  // rows where dominance fails
  std::string message;
};

inline constexpr double kDominanceTolerance = 1e-12;

/// Symmetric, non-positive off-diagonals, and M_ii >= -sum_{j != i} M_ij.
/// Non-square or asymmetric input is a structural error, not a `false`.
inline SddmReport is_sddm(const Eigen::MatrixXd& m, double tol = kDominanceTolerance) {
  if (m.rows() != m.cols()) throw StructuralError("is_sddm: matrix is not square");
  const int n = static_cast<int>(m.rows());
  SddmReport report;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double scale = std::max({1.0, std::abs(m(i, j)), std::abs(m(j, i))});
      if (std::abs(m(i, j) - m(j, i)) > tol * scale) throw StructuralError("is_sddm: matrix is not symmetric");
    }
  }
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    bool sign_ok = true;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (m(i, j) > 0.0) sign_ok = false;
      off += -m(i, j);
    }
    if (!sign_ok || m(i, i) < off - tol * std::max(1.0, std::abs(m(i, i)))) {
      report.ok = false;
      report.violating_rows.push_back(i);
    }
  }
  if (!report.ok) {
    report.message = "rows violating diagonal dominance or sign pattern:";
    for (int r : report.violating_rows) report.message += " " + std::to_string(r);
  }
  return report;
}

inline SddmReport is_sddm(const SplitMatrix& m, double tol = kDominanceTolerance) {
  SddmReport report;
  for (int i = 0; i < m.size(); ++i) {
    if (m.row_excess(i) < -tol * std::max(1.0, m.diag(i))) {
      report.ok = false;
      report.violating_rows.push_back(i);
    }
  }
  if (!report.ok) {
    report.message = "rows violating diagonal dominance:";
    for (int r : report.violating_rows) report.message += " " + std::to_string(r);
  }
  return report;
}

/// An SDDM matrix is nonsingular iff every connected component of its graph
/// owns at least one strictly dominant row.
inline bool is_nonsingular_sddm(const SplitMatrix& m, double tol = 1e-12) {
  if (!is_sddm(m).ok) return false;
  const WeightedGraph g = m.graph();
  std::vector<int> component(m.size(), -1);
  std::vector<bool> strict;
  for (NodeId s = 0; s < m.size(); ++s) {
    if (component[s] >= 0) continue;
    const int c = static_cast<int>(strict.size());
    strict.push_back(false);
    auto dist = bfs_distances(g, s);
    for (NodeId v = 0; v < m.size(); ++v) {
      if (dist[v] < 0) continue;
      component[v] = c;
      if (m.row_excess(v) > tol * m.diag(v)) strict[c] = true;
    }
  }
  return std::all_of(strict.begin(), strict.end(), [](bool b) { return b; });
}

/// Weighted Laplacian: D_ii = weighted degree, A = weighted adjacency.
inline SplitMatrix laplacian(const WeightedGraph& g) {
  std::vector<double> diag(g.size(), 0.0);
  std::vector<OffDiagonal> off;
  off.reserve(g.edge_count());
  for (const Edge& e : g.edges()) {
    diag[e.i] += e.w;
    diag[e.j] += e.w;
    off.push_back({e.i, e.j, e.w});
  }
  for (int k = 0; k < g.size(); ++k) {
    if (diag[k] <= 0.0) throw StructuralError("laplacian: node " + std::to_string(k) + " is isolated");
  }
  return SplitMatrix(std::move(diag), off);
}

/// Lowest-index node of maximum off-diagonal degree.
inline NodeId grounding_node(const SplitMatrix& m) {
  NodeId best = 0;
  for (NodeId k = 1; k < m.size(); ++k) {
    if (m.row(k).size() > m.row(best).size()) best = k;
  }
  return best;
}

/// A Laplacian with one coordinate removed, plus the map back to n coordinates.
struct GroundedSystem {
  SplitMatrix matrix;
  NodeId ground = 0;
  std::vector<NodeId> to_full;  // reduced index -> original index
  int full_size = 0;

  std::vector<double> restrict_vector(std::span<const double> full) const {
    std::vector<double> out(to_full.size());
    for (std::size_t r = 0; r < to_full.size(); ++r) out[r] = full[to_full[r]];
    return out;
  }

  /// Inserts 0 at the grounded coordinate.
  std::vector<double> embed(std::span<const double> reduced) const {
    std::vector<double> out(full_size, 0.0);
    for (std::size_t r = 0; r < to_full.size(); ++r) out[to_full[r]] = reduced[r];
    return out;
  }
};

inline GroundedSystem ground(const SplitMatrix& l, NodeId g) {
  const int n = l.size();
  if (g < 0 || g >= n) throw ParameterError("ground: node out of range");
  if (n < 2) throw ParameterError("ground: need at least two nodes");
  if (!l.graph().is_connected()) {
    throw StructuralError("ground: input graph is disconnected; the grounded system would stay singular");
  }
  GroundedSystem out;
  out.ground = g;
  out.full_size = n;
  std::vector<int> to_reduced(n, -1);
  for (NodeId k = 0; k < n; ++k) {
    if (k == g) continue;
    to_reduced[k] = static_cast<int>(out.to_full.size());
    out.to_full.push_back(k);
  }
  std::vector<double> diag;
  std::vector<OffDiagonal> off;
  for (NodeId k : out.to_full) {
    diag.push_back(l.diag(k));
    for (const RowEntry& e : l.row(k)) {
      if (e.col > k && e.col != g) off.push_back({to_reduced[k], to_reduced[e.col], e.value});
    }
  }
  out.matrix = SplitMatrix(std::move(diag), off);
  return out;
}

inline std::vector<double> project_out_constant(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  if (out.empty()) return out;
  double mean = 0.0;
  for (double x : out) mean += x;
  mean /= static_cast<double>(out.size());
  for (double& x : out) x -= mean;
  return out;
}

}  // namespace sddmflow
