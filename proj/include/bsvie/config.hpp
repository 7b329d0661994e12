#pragma once

// Key-value experiment configuration. Problems built from the declarative
// primitives serialize to a canonical text form that parses back to the
// same problem and re-serializes to identical bytes.

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "catalog.hpp"
#include "error.hpp"
#include "expr.hpp"
#include "model.hpp"

namespace bsvie {

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_kv(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::ConfigInvalid, "line " + std::to_string(lineno) + ": expected key = value");
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return kv;
}

namespace detail {

inline const std::string& need(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) fail(ErrorCode::ConfigInvalid, "missing key '" + key + "'");
  return it->second;
}

inline double num(const KeyValues& kv, const std::string& key) { return parse_number(need(kv, key), key); }

inline double num_or(const KeyValues& kv, const std::string& key, double dflt) {
  return kv.count(key) ? parse_number(kv.at(key), key) : dflt;
}

inline int int_or(const KeyValues& kv, const std::string& key, int dflt) {
  if (!kv.count(key)) return dflt;
  const double v = parse_number(kv.at(key), key);
  if (v != static_cast<int>(v)) fail(ErrorCode::ConfigInvalid, "key '" + key + "' must be an integer");
  return static_cast<int>(v);
}

inline std::string str_or(const KeyValues& kv, const std::string& key, const std::string& dflt) {
  return kv.count(key) ? kv.at(key) : dflt;
}

inline std::string idx(const std::string& base, int i) { return base + "[" + std::to_string(i) + "]"; }

}  // namespace detail

inline std::string problem_to_config(const AnyProblem& ap) {
  const ProblemData& p = data_of(ap);
  if (!p.declarative()) fail(ErrorCode::ConfigInvalid, "problem '" + p.name + "' is not built from primitives");
  const VarLayout L = p.layout();
  const VarLayout ML{p.model.n, 1, p.model.d};
  std::ostringstream o;
  o << "problem.name = " << p.name << "\n";
  o << "problem.kind = " << (std::holds_alternative<TypeIIProblem>(ap) ? "type2" : "type1") << "\n";
  o << "problem.n = " << p.model.n << "\n";
  o << "problem.m = " << p.m << "\n";
  o << "problem.d = " << p.model.d << "\n";
  o << "problem.T = " << format_double(p.T) << "\n";
  o << "problem.L = " << format_double(p.lipschitz_L) << "\n";
  for (int i = 0; i < p.m; ++i) o << detail::idx("problem.psi", i) << " = " << format_expr(p.psi_expr[i], L) << "\n";
  for (int i = 0; i < p.m; ++i) o << detail::idx("problem.g", i) << " = " << format_expr(p.g_expr[i], L) << "\n";
  o << "model.L = " << format_double(p.model.lipschitz_L) << "\n";
  o << "model.sigma_bar = " << format_double(p.model.sigma_bar) << "\n";
  o << "model.M = " << format_double(p.model.bound_M) << "\n";
  for (int i = 0; i < p.model.n; ++i)
    o << detail::idx("model.b", i) << " = " << format_expr(p.model.b_expr[i], ML) << "\n";
  for (int i = 0; i < p.model.n * p.model.d; ++i)
    o << detail::idx("model.sigma", i) << " = " << format_expr(p.model.sigma_expr[i], ML) << "\n";
  return o.str();
}

inline AnyProblem problem_from_config(const KeyValues& kv) {
  if (kv.count("problem.catalog")) {
    auto e = find_catalog(kv.at("problem.catalog"));
    if (!e) fail(ErrorCode::ConfigInvalid, "unknown catalog problem '" + kv.at("problem.catalog") + "'");
    return e->problem;
  }
  using namespace detail;
  const std::string kind = need(kv, "problem.kind");
  if (kind != "type1" && kind != "type2") fail(ErrorCode::ConfigInvalid, "problem.kind must be type1 or type2");
  const int n = int_or(kv, "problem.n", 1), m = int_or(kv, "problem.m", 1), d = int_or(kv, "problem.d", 1);
  if (n < 1 || m < 1 || d < 1) fail(ErrorCode::ConfigInvalid, "dimensions must be positive");
  const VarLayout L{n, m, d}, ML{n, 1, d};
  std::vector<Expr> b, sig, psi, g;
  for (int i = 0; i < n; ++i) b.push_back(parse_expr(need(kv, idx("model.b", i)), ML));
  for (int i = 0; i < n * d; ++i) sig.push_back(parse_expr(need(kv, idx("model.sigma", i)), ML));
  for (int i = 0; i < m; ++i) psi.push_back(parse_expr(need(kv, idx("problem.psi", i)), L));
  for (int i = 0; i < m; ++i) g.push_back(parse_expr(need(kv, idx("problem.g", i)), L));
  SdeModel mdl = make_model(n, d, b, sig, num(kv, "model.L"), num(kv, "model.sigma_bar"), num(kv, "model.M"));
  const std::string name = str_or(kv, "problem.name", "custom");
  const double T = num(kv, "problem.T"), PL = num(kv, "problem.L");
  if (!(T >= 0)) fail(ErrorCode::ConfigInvalid, "problem.T must be non-negative");
  if (kind == "type1") return make_type1(name, mdl, m, T, psi, g, PL);
  return make_type2(name, mdl, m, T, psi, g, PL);
}

inline AnyProblem problem_from_config(const std::string& text) { return problem_from_config(parse_kv(text)); }

struct GridConfig {
  int Ns = 200;
  int Nx = 401;
  double R = 8.0;
  double alpha = 0.5;
};

struct EnsembleConfig {
  int paths = 10000;
  int steps = 200;
  double x0 = 0.0;
  std::uint64_t seed = 20240607;
  bool antithetic = false;
};

struct SolverConfig {
  std::string backend = "fd";
  double tol = 1e-6;
  int max_iter = 50;
  double p = 1.5;
};

struct ExperimentConfig {
  AnyProblem problem;
  std::string problem_text;  // catalog reference or canonical problem block
  GridConfig grid;
  EnsembleConfig ensemble;
  SolverConfig solver;
  std::string pipeline = "verify";
  double residual_tol = 5e-2;
};

inline std::string experiment_to_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << c.problem_text;
  o << "grid.Ns = " << c.grid.Ns << "\n";
  o << "grid.Nx = " << c.grid.Nx << "\n";
  o << "grid.R = " << format_double(c.grid.R) << "\n";
  o << "grid.alpha = " << format_double(c.grid.alpha) << "\n";
  o << "ensemble.paths = " << c.ensemble.paths << "\n";
  o << "ensemble.steps = " << c.ensemble.steps << "\n";
  o << "ensemble.x0 = " << format_double(c.ensemble.x0) << "\n";
  o << "ensemble.seed = " << c.ensemble.seed << "\n";
  o << "ensemble.antithetic = " << (c.ensemble.antithetic ? 1 : 0) << "\n";
  o << "solver.backend = " << c.solver.backend << "\n";
  o << "solver.tol = " << format_double(c.solver.tol) << "\n";
  o << "solver.max_iter = " << c.solver.max_iter << "\n";
  o << "solver.p = " << format_double(c.solver.p) << "\n";
  o << "pipeline = " << c.pipeline << "\n";
  o << "verify.residual_tol = " << format_double(c.residual_tol) << "\n";
  return o.str();
}

inline std::string config_hash(const ExperimentConfig& c) { return hex64(fnv1a(experiment_to_config(c))); }

inline ExperimentConfig parse_experiment(const std::string& text) {
  using namespace detail;
  const KeyValues kv = parse_kv(text);
  ExperimentConfig c;
  c.problem = problem_from_config(kv);
  if (kv.count("problem.catalog"))
    c.problem_text = "problem.catalog = " + kv.at("problem.catalog") + "\n";
  else
    c.problem_text = problem_to_config(c.problem);
  c.grid.Ns = int_or(kv, "grid.Ns", c.grid.Ns);
  c.grid.Nx = int_or(kv, "grid.Nx", c.grid.Nx);
  c.grid.R = num_or(kv, "grid.R", c.grid.R);
  c.grid.alpha = num_or(kv, "grid.alpha", c.grid.alpha);
  c.ensemble.paths = int_or(kv, "ensemble.paths", c.ensemble.paths);
  c.ensemble.steps = int_or(kv, "ensemble.steps", c.ensemble.steps);
  c.ensemble.x0 = num_or(kv, "ensemble.x0", c.ensemble.x0);
  if (kv.count("ensemble.seed")) c.ensemble.seed = std::stoull(kv.at("ensemble.seed"));
  c.ensemble.antithetic = int_or(kv, "ensemble.antithetic", 0) != 0;
  c.solver.backend = str_or(kv, "solver.backend", c.solver.backend);
  if (c.solver.backend != "fd" && c.solver.backend != "picard" && c.solver.backend != "kernel")
    fail(ErrorCode::ConfigInvalid, "solver.backend must be fd, picard or kernel");
  c.solver.tol = num_or(kv, "solver.tol", c.solver.tol);
  c.solver.max_iter = int_or(kv, "solver.max_iter", c.solver.max_iter);
  c.solver.p = num_or(kv, "solver.p", c.solver.p);
  c.pipeline = str_or(kv, "pipeline", c.pipeline);
  if (c.pipeline != "verify" && c.pipeline != "solve" && c.pipeline != "convergence")
    fail(ErrorCode::ConfigInvalid, "pipeline must be verify, solve or convergence");
  c.residual_tol = num_or(kv, "verify.residual_tol", c.residual_tol);
  if (c.grid.Ns < 1 || c.grid.Nx < 5 || !(c.grid.R > 0))
    fail(ErrorCode::ConfigInvalid, "grid needs Ns >= 1, Nx >= 5 and R > 0");
  if (c.ensemble.paths < 1 || c.ensemble.steps < 1) fail(ErrorCode::ConfigInvalid, "ensemble needs paths, steps >= 1");
  return c;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigInvalid, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment(ss.str());
}

}  // namespace bsvie
