#pragma once

// Experiment runner: one generated flow problem, several methods, one trace
// CSV per method and a summary JSON.

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "sddmflow/errors.hpp"
#include "sddmflow/generator.hpp"
#include "sddmflow/io.hpp"
#include "sddmflow/netflow.hpp"
#include "sddmflow/optimizers.hpp"

namespace sddmflow {

struct ExperimentConfig {
  std::string name = "experiment";
  int n = 30;
  int m = 70;
  std::uint64_t seed = 0;
  double supply = 1.0;
  CostFamily costs;
  double eps = 1e-4;
  int R = 1;
  std::optional<int> d_override;
  std::vector<Method> methods{Method::exact_newton, Method::sddm_newton, Method::neumann_newton, Method::gradient};
  AlphaRule alpha_rule = AlphaRule::backtracking;           // Newton-type methods
  AlphaRule gradient_alpha_rule = AlphaRule::fixed;         // gradient descent
  std::optional<double> gradient_alpha;                     // default gamma / mu_n(L)
  double threshold = 1e-10;
  std::optional<int> newton_cap;                            // default 10 n
  int gradient_cap = 10000;
  int neumann_terms = 2;
  double feasibility_target = 1e-3;
  bool timing = false;
  std::string output_dir;

  /// Checks every module precondition before anything runs.
  void validate() const {
    if (n < 2) throw ParameterError("config: n must be >= 2");
    const long long max_edges = static_cast<long long>(n) * (n - 1) / 2;
    if (m < n - 1) throw ParameterError("config: m = " + std::to_string(m) + " < n - 1 cannot give a connected network");
    if (m > max_edges) throw ParameterError("config: m exceeds n(n-1)/2");
    if (!(supply > 0.0)) throw ParameterError("config: supply must be positive");
    if (!(costs.gamma > 0.0) || costs.Gamma < costs.gamma) throw ParameterError("config: need 0 < gamma <= Gamma");
    if (costs.kind == CostKind::smoothed && !(costs.s > 0.0)) throw ParameterError("config: smoothed costs need s > 0");
    if (!(eps > 0.0 && eps <= 0.5)) throw ParameterError("config: eps must lie in (0, 1/2]");
    if (!dist::is_power_of_two(R)) throw ParameterError("config: R must be a power of two");
    if (d_override && *d_override < 1) throw ParameterError("config: d must be >= 1");
    if (methods.empty()) throw ParameterError("config: no methods selected");
    if (!(threshold > 0.0)) throw ParameterError("config: threshold must be positive");
    if (newton_cap && *newton_cap < 0) throw ParameterError("config: newton_cap must be >= 0");
    if (gradient_cap < 0) throw ParameterError("config: gradient_cap must be >= 0");
    if (neumann_terms < 0) throw ParameterError("config: neumann_terms must be >= 0");
    if (gradient_alpha && !(*gradient_alpha > 0.0)) throw ParameterError("config: gradient_alpha must be positive");
    if (!(feasibility_target > 0.0)) throw ParameterError("config: feasibility_target must be positive");
  }

  OptimizerConfig optimizer_config(Method method) const {
    OptimizerConfig c;
    c.method = method;
    c.eps = eps;
    c.R = R;
    c.d_override = d_override;
    c.threshold = threshold;
    c.neumann_terms = neumann_terms;
    c.seed = seed;
    c.timing = timing;
    if (method == Method::gradient) {
      c.alpha_rule = gradient_alpha_rule;
      c.alpha = gradient_alpha;
      c.max_iterations = gradient_cap;
    } else {
      c.alpha_rule = alpha_rule;
      c.max_iterations = newton_cap.value_or(10 * n);
    }
    return c;
  }
};

namespace detail {

template <class T>
T toml_get(const toml::table& t, std::string_view path, T fallback) {
  const toml::node_view<const toml::node> v = t.at_path(path);
  if (!v) return fallback;
  if constexpr (std::is_same_v<T, std::string>) {
    if (auto s = v.value<std::string>()) return *s;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto b = v.value<bool>()) return *b;
  } else if constexpr (std::is_integral_v<T>) {
    if (auto i = v.value<std::int64_t>()) return static_cast<T>(*i);
  } else {
    if (auto d = v.value<double>()) return *d;
  }
  throw ParameterError("config: '" + std::string(path) + "' has the wrong type");
}

}  // namespace detail

/// Keys (all optional): name, seed, [network] n m supply, [costs] kind gamma
/// Gamma s, [solver] eps R d, [run] methods alpha_rule gradient_alpha_rule
/// gradient_alpha threshold newton_cap gradient_cap neumann_terms
/// feasibility_target timing, [output] dir.
inline ExperimentConfig parse_experiment_config(std::string_view toml_text, std::string_view source = "config") {
  toml::table t;
  try {
    t = toml::parse(toml_text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << e;
    throw ParameterError("config: " + os.str());
  }
  using detail::toml_get;
  ExperimentConfig c;
  c.name = toml_get<std::string>(t, "name", c.name);
  const std::int64_t seed = toml_get<std::int64_t>(t, "seed", 0);
  if (seed < 0) throw ParameterError("config: seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.n = toml_get<int>(t, "network.n", c.n);
  c.m = toml_get<int>(t, "network.m", c.m);
  c.supply = toml_get<double>(t, "network.supply", c.supply);
  const std::string kind = toml_get<std::string>(t, "costs.kind", cost_kind_name(c.costs.kind));
  if (kind == "quadratic") {
    c.costs.kind = CostKind::quadratic;
  } else if (kind == "smoothed") {
    c.costs.kind = CostKind::smoothed;
  } else {
    throw ParameterError("config: costs.kind must be quadratic or smoothed");
  }
  c.costs.gamma = toml_get<double>(t, "costs.gamma", c.costs.gamma);
  c.costs.Gamma = toml_get<double>(t, "costs.Gamma", c.costs.Gamma);
  c.costs.s = toml_get<double>(t, "costs.s", c.costs.s);
  c.eps = toml_get<double>(t, "solver.eps", c.eps);
  c.R = toml_get<int>(t, "solver.R", c.R);
  if (t.at_path("solver.d")) c.d_override = toml_get<int>(t, "solver.d", 0);
  if (const toml::array* arr = t.at_path("run.methods").as_array()) {
    c.methods.clear();
    for (const toml::node& node : *arr) {
      auto s = node.value<std::string>();
      if (!s) throw ParameterError("config: run.methods must be strings");
      c.methods.push_back(parse_method(*s));
    }
  }
  c.alpha_rule = parse_alpha_rule(toml_get<std::string>(t, "run.alpha_rule", alpha_rule_name(c.alpha_rule)));
  c.gradient_alpha_rule =
      parse_alpha_rule(toml_get<std::string>(t, "run.gradient_alpha_rule", alpha_rule_name(c.gradient_alpha_rule)));
  if (t.at_path("run.gradient_alpha")) c.gradient_alpha = toml_get<double>(t, "run.gradient_alpha", 0.0);
  c.threshold = toml_get<double>(t, "run.threshold", c.threshold);
  if (t.at_path("run.newton_cap")) c.newton_cap = toml_get<int>(t, "run.newton_cap", 0);
  c.gradient_cap = toml_get<int>(t, "run.gradient_cap", c.gradient_cap);
  c.neumann_terms = toml_get<int>(t, "run.neumann_terms", c.neumann_terms);
  c.feasibility_target = toml_get<double>(t, "run.feasibility_target", c.feasibility_target);
  c.timing = toml_get<bool>(t, "run.timing", c.timing);
  c.output_dir = toml_get<std::string>(t, "output.dir", c.output_dir);
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ParameterError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), p.string());
}

inline FlowProblem make_experiment_problem(const ExperimentConfig& c) {
  return make_flow_problem(generate_random_network(c.n, c.m, c.seed, {}, c.supply), c.costs, c.seed);
}

struct MethodOutcome {
  Method method;
  RunTrace trace;
  std::string csv;
};

struct ExperimentResult {
  FlowProblem problem;
  std::vector<MethodOutcome> outcomes;
  nlohmann::ordered_json summary;

  const MethodOutcome* find(Method m) const {
    for (const MethodOutcome& o : outcomes)
      if (o.method == m) return &o;
    return nullptr;
  }
};

inline nlohmann::ordered_json method_summary(const RunTrace& t, const ExperimentConfig& c) {
  auto opt = [](std::optional<int> v) -> nlohmann::ordered_json {
    if (v) return *v;
    return nullptr;
  };
  const TraceRow& last = t.rows.back();
  return {{"iterations", last.k},
          {"converged", t.converged},
          {"iterations_to_threshold", opt(t.iterations_to_threshold(c.threshold))},
          {"iterations_to_feasibility", opt(t.iterations_to_feasibility(c.feasibility_target))},
          {"final_f", last.f},
          {"final_feasibility", last.feas},
          {"final_gnormL", last.gnormL},
          {"messages", last.messages},
          {"rounds", last.rounds},
          {"cost_report", t.cost.to_json()}};
}

/// Runs every configured method on the same instance. Writes <method>.csv and
/// summary.json into `output_dir` when it is set.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult r;
  const RandomNetwork net = generate_random_network(c.n, c.m, c.seed, {}, c.supply);
  r.problem = make_flow_problem(net, c.costs, c.seed);
  nlohmann::ordered_json methods = nlohmann::ordered_json::object();
  for (Method m : c.methods) {
    MethodOutcome o{m, {}, {}};
    try {
      o.trace = run_optimizer(r.problem, c.optimizer_config(m));
    } catch (const Error&) {
      rethrow_with_context("experiment '" + c.name + "', method " + method_name(m) + ": ");
    }
    std::ostringstream os;
    write_trace_csv(os, o.trace);
    o.csv = os.str();
    methods[method_name(m)] = method_summary(o.trace, c);
    r.outcomes.push_back(std::move(o));
  }
  r.summary = {{"name", c.name},
               {"seed", c.seed},
               {"n", c.n},
               {"m", c.m},
               {"cost_kind", cost_kind_name(c.costs.kind)},
               {"gamma", c.costs.gamma},
               {"Gamma", c.costs.Gamma},
               {"eps", c.eps},
               {"R", c.R},
               {"threshold", c.threshold},
               {"feasibility_target", c.feasibility_target},
               {"source", net.source},
               {"sink", net.sink},
               {"constants", r.outcomes.front().trace.constants.to_json()},
               {"methods", methods}};
  if (!c.output_dir.empty()) {
    const std::filesystem::path dir(c.output_dir);
    for (const MethodOutcome& o : r.outcomes) io::write_text(dir / (std::string(method_name(o.method)) + ".csv"), o.csv);
    io::write_text(dir / "summary.json", r.summary.dump(2) + "\n");
  }
  return r;
}

}  // namespace sddmflow
