#pragma once

// File formats: Matrix Market (symmetric real coordinate) for matrices, plain
// text for vectors, JSON for networks, flow problems and chain manifests.
// docs/formats.md has the schemas.

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sddmflow/chain.hpp"
#include "sddmflow/errors.hpp"
#include "sddmflow/generator.hpp"
#include "sddmflow/graph.hpp"
#include "sddmflow/netflow.hpp"
#include "sddmflow/split_matrix.hpp"

namespace sddmflow::io {

using json = nlohmann::ordered_json;

inline constexpr int kFlowProblemVersion = 1;

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ----------------------------------------------------------- Matrix Market

/// Symmetric coordinate entries, 0-based, lower triangle (i >= j).
struct SymmetricEntries {
  int n = 0;
  std::map<std::pair<int, int>, double> lower;
};

inline SymmetricEntries read_matrix_market_entries(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParameterError("matrix market: empty input");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  if (tag != "%%MatrixMarket" || lower(object) != "matrix" || lower(format) != "coordinate") {
    throw ParameterError("matrix market: expected a '%%MatrixMarket matrix coordinate' banner");
  }
  field = lower(field);
  symmetry = lower(symmetry);
  if (field != "real" && field != "integer") throw ParameterError("matrix market: field must be real or integer");
  if (symmetry != "symmetric" && symmetry != "general") {
    throw ParameterError("matrix market: symmetry must be symmetric or general");
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream size_line(line);
  long long rows = 0, cols = 0, nnz = 0;
  if (!(size_line >> rows >> cols >> nnz)) throw ParameterError("matrix market: malformed size line");
  if (rows != cols) throw StructuralError("matrix market: matrix is not square");
  if (rows < 1 || nnz < 0) throw ParameterError("matrix market: bad dimensions");
  SymmetricEntries out;
  out.n = static_cast<int>(rows);
  std::map<std::pair<int, int>, double> upper;
  for (long long k = 0; k < nnz; ++k) {
    long long i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) throw ParameterError("matrix market: expected " + std::to_string(nnz) + " entries");
    if (i < 1 || j < 1 || i > rows || j > cols) throw StructuralError("matrix market: entry index out of range");
    if (!std::isfinite(v)) throw ParameterError("matrix market: non-finite entry");
    const int a = static_cast<int>(i - 1);
    const int b = static_cast<int>(j - 1);
    if (symmetry == "symmetric" && a < b) throw StructuralError("matrix market: symmetric storage needs i >= j");
    auto& target = a >= b ? out.lower : upper;
    const std::pair<int, int> key = a >= b ? std::make_pair(a, b) : std::make_pair(b, a);
    if (!target.emplace(key, v).second) throw StructuralError("matrix market: duplicate entry");
  }
  if (symmetry == "general") {
    for (const auto& [key, v] : upper) {
      auto it = out.lower.find(key);
      const double mirror = it == out.lower.end() ? 0.0 : it->second;
      if (std::abs(mirror - v) > 1e-12 * std::max({1.0, std::abs(v), std::abs(mirror)})) {
        throw StructuralError("matrix market: general matrix is not symmetric");
      }
    }
    for (const auto& [key, v] : out.lower) {
      if (key.first != key.second && !upper.count(key) && v != 0.0) {
        throw StructuralError("matrix market: general matrix is not symmetric");
      }
    }
  }
  return out;
}

/// Reads an SDDM-shaped matrix: positive diagonal, non-positive off-diagonals.
inline SplitMatrix read_matrix_market(std::istream& in) {
  SymmetricEntries e = read_matrix_market_entries(in);
  std::vector<double> diag(e.n, 0.0);
  std::vector<OffDiagonal> off;
  for (const auto& [key, v] : e.lower) {
    if (key.first == key.second) {
      diag[key.first] = v;
    } else {
      if (v > 0.0) {
        throw StructuralError("matrix market: positive off-diagonal at (" + std::to_string(key.first + 1) + ", " +
                              std::to_string(key.second + 1) + "); not an SDDM splitting");
      }
      off.push_back({key.second, key.first, -v});
    }
  }
  return SplitMatrix(std::move(diag), off);
}

inline SplitMatrix read_matrix_market(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ParameterError("cannot open " + p.string());
  return read_matrix_market(in);
}

inline void write_matrix_market(std::ostream& os, const SplitMatrix& m) {
  long long nnz = m.size();
  for (NodeId i = 0; i < m.size(); ++i)
    for (const RowEntry& e : m.row(i))
      if (e.col < i) ++nnz;
  os << "%%MatrixMarket matrix coordinate real symmetric\n" << m.size() << ' ' << m.size() << ' ' << nnz << '\n';
  for (NodeId i = 0; i < m.size(); ++i) {
    for (const RowEntry& e : m.row(i))
      if (e.col < i) os << i + 1 << ' ' << e.col + 1 << ' ' << fmt17(-e.value) << '\n';
    os << i + 1 << ' ' << i + 1 << ' ' << fmt17(m.diag(i)) << '\n';
  }
}

/// Dense symmetric matrix, lower triangle, exact zeros skipped.
inline void write_matrix_market(std::ostream& os, const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  long long nnz = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j)
      if (m(i, j) != 0.0) ++nnz;
  os << "%%MatrixMarket matrix coordinate real symmetric\n" << n << ' ' << n << ' ' << nnz << '\n';
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j)
      if (m(i, j) != 0.0) os << i + 1 << ' ' << j + 1 << ' ' << fmt17(m(i, j)) << '\n';
}

inline Eigen::MatrixXd read_matrix_market_dense(std::istream& in) {
  SymmetricEntries e = read_matrix_market_entries(in);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(e.n, e.n);
  for (const auto& [key, v] : e.lower) {
    m(key.first, key.second) = v;
    m(key.second, key.first) = v;
  }
  return m;
}

// ------------------------------------------------------------------ vectors

/// Whitespace-separated numbers; '#' or '%' starts a comment line.
inline std::vector<double> read_vector(std::istream& in) {
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#' || line[first] == '%') continue;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw ParameterError("vector file: '" + tok + "' is not a number");
      out.push_back(v);
    }
  }
  return out;
}

inline std::vector<double> read_vector(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ParameterError("cannot open " + p.string());
  return read_vector(in);
}

inline void write_vector(std::ostream& os, std::span<const double> v) {
  for (double x : v) os << fmt17(x) << '\n';
}

// ------------------------------------------------------------- JSON formats

/// {n, edges: [[i, j, w]], arcs: [[src, dst]], b: [...]}.
inline json network_to_json(const WeightedGraph& g, const DirectedNetwork& net, std::span<const double> b) {
  json edges = json::array();
  for (const Edge& e : g.edges()) edges.push_back({e.i, e.j, e.w});
  json arcs = json::array();
  for (const Arc& a : net.arcs()) arcs.push_back({a.src, a.dst});
  return {{"n", g.size()}, {"edges", edges}, {"arcs", arcs}, {"b", std::vector<double>(b.begin(), b.end())}};
}

struct NetworkData {
  WeightedGraph graph;
  DirectedNetwork network;
  std::vector<double> b;
};

inline NetworkData network_from_json(const json& j) {
  try {
    NetworkData out;
    const int n = j.at("n").get<int>();
    std::vector<Edge> edges;
    for (const auto& e : j.value("edges", json::array())) {
      edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.size() > 2 ? e.at(2).get<double>() : 1.0});
    }
    std::vector<Arc> arcs;
    for (const auto& a : j.value("arcs", json::array())) arcs.push_back({a.at(0).get<int>(), a.at(1).get<int>()});
    out.graph = WeightedGraph(n, std::move(edges));
    out.network = DirectedNetwork(n, std::move(arcs));
    out.b = j.value("b", std::vector<double>(n, 0.0));
    if (static_cast<int>(out.b.size()) != n) throw ParameterError("network json: b has wrong length");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("network json: ") + e.what());
  }
}

inline json cost_to_json(const CostFunction& c) {
  if (c.kind == CostKind::quadratic) return {{"kind", "quadratic"}, {"a", c.a}, {"c", c.c}};
  return {{"kind", "smoothed"}, {"a", c.a}, {"s", c.s}};
}

inline CostFunction cost_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "quadratic") return CostFunction::quadratic(j.at("a").get<double>(), j.value("c", 0.0));
  if (kind == "smoothed") return CostFunction::smoothed(j.at("a").get<double>(), j.at("s").get<double>());
  throw ParameterError("flow problem json: unknown cost kind '" + kind + "'");
}

/// {format, version, network: {...}, costs: [...], b: [...]}. The network
/// block's edges are the underlying graph with parallel arcs merged.
inline json flow_problem_to_json(const FlowProblem& p) {
  return {{"format", "sddmflow-flow-problem"},
          {"version", kFlowProblemVersion},
          {"network", network_to_json(p.network.underlying_graph(), p.network, p.b)},
          {"costs", [&] {
             json a = json::array();
             for (const CostFunction& c : p.costs) a.push_back(cost_to_json(c));
             return a;
           }()},
          {"b", p.b}};
}

inline FlowProblem flow_problem_from_json(const json& j) {
  try {
    if (j.value("format", std::string()) != "sddmflow-flow-problem") {
      throw ParameterError("flow problem json: missing format tag 'sddmflow-flow-problem'");
    }
    const int version = j.at("version").get<int>();
    if (version != kFlowProblemVersion) {
      throw ParameterError("flow problem json: unsupported version " + std::to_string(version));
    }
    NetworkData net = network_from_json(j.at("network"));
    FlowProblem p;
    p.network = std::move(net.network);
    for (const auto& c : j.at("costs")) p.costs.push_back(cost_from_json(c));
    p.b = j.contains("b") ? j.at("b").get<std::vector<double>>() : net.b;
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("flow problem json: ") + e.what());
  }
}

inline json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ParameterError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(p.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ParameterError("cannot write " + p.string());
  out << text;
}

// ------------------------------------------------------------ chain export

/// Writes level_<i>.mtx holding M_i = D_i - A_i for i = 0..d and a
/// manifest.json {d, epsilons, kappa, seed, levels}. Dense, so n is limited
/// to the oracle cap.
inline void export_chain(const std::filesystem::path& dir, const InverseChain& chain, double kappa,
                         std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  json levels = json::array();
  for (int i = 0; i <= chain.depth(); ++i) {
    const std::string name = "level_" + std::to_string(i) + ".mtx";
    std::ostringstream os;
    write_matrix_market(os, Eigen::MatrixXd(chain.dense_D(i) - chain.dense_A(i)));
    write_text(dir / name, os.str());
    levels.push_back(name);
  }
  json manifest = {{"d", chain.depth()},
                   {"epsilons", chain.epsilons()},
                   {"kappa", kappa},
                   {"seed", seed},
                   {"measured", chain.budget_measured()},
                   {"levels", levels}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

struct ChainBundle {
  int d = 0;
  std::vector<double> epsilons;
  double kappa = 1.0;
  std::uint64_t seed = 0;
  bool measured = false;
  std::vector<Eigen::MatrixXd> levels;

  /// The chain rebuilt from level 0 with the recorded budgets.
  InverseChain chain() const { return InverseChain(SplitMatrix::from_dense(levels.at(0)), d, epsilons, measured); }
};

inline ChainBundle import_chain(const std::filesystem::path& dir) {
  const json m = read_json(dir / "manifest.json");
  ChainBundle b;
  try {
    b.d = m.at("d").get<int>();
    b.epsilons = m.at("epsilons").get<std::vector<double>>();
    b.kappa = m.at("kappa").get<double>();
    b.seed = m.at("seed").get<std::uint64_t>();
    b.measured = m.value("measured", false);
    for (const auto& name : m.at("levels")) {
      std::ifstream in(dir / name.get<std::string>());
      if (!in) throw ParameterError("chain import: missing " + name.get<std::string>());
      b.levels.push_back(read_matrix_market_dense(in));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("chain manifest: ") + e.what());
  }
  if (static_cast<int>(b.levels.size()) != b.d + 1) throw ParameterError("chain import: level count does not match d");
  return b;
}

}  // namespace sddmflow::io
