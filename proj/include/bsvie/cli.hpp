#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "acceptance.hpp"
#include "catalog.hpp"
#include "config.hpp"
#include "io.hpp"
#include "pde_type1.hpp"
#include "pde_type2.hpp"
#include "picard.hpp"
#include "repr.hpp"
#include "sde.hpp"

namespace bsvie {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode { kExitPass = 0, kExitVerifyFail = 1, kExitConfig = 2, kExitNumerical = 3 };

struct RunOptions {
  std::string config, suite, problem, backend, out = "out";
  int refine = 0;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

namespace detail {

struct Manifest {
  json j = json::object();
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void stage(const std::string& name, double secs) { j["wall_seconds"][name] = secs; }
  void file(const std::string& path) { j["files"].push_back(path); }
  void write(const std::filesystem::path& dir, int code) {
    j["exit_code"] = code;
    j["wall_seconds"]["total"] = seconds_since(t0);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["finished_utc"] = stamp;
    j["versions"] = {{"bsvie", kVersion},
                     {"compiler", __VERSION__},
                     {"cxx", static_cast<long>(__cplusplus)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    std::ofstream(dir / "manifest.json") << j.dump(2) << "\n";
  }
};

struct Solved {
  std::optional<ThetaField> theta;
  std::optional<MildSolution> mild;
  const ThetaField& field() const { return mild ? mild->theta : *theta; }
};

inline Solved solve_any(const AnyProblem& ap, const TriangleGrid& g, const SolverConfig& s) {
  Solved out;
  if (const auto* p1 = std::get_if<TypeIProblem>(&ap)) {
    if (s.backend == "fd") {
      out.theta = solve_type1_fd(*p1, g);
    } else {
      PicardOptions po;
      po.max_iter = std::max(s.max_iter, 1);
      out.theta = solve_type1_picard(*p1, g, po).field;
    }
    return out;
  }
  Type2Options o;
  o.tol = s.tol;
  o.max_iter = s.max_iter;
  o.gamma_backend = s.backend == "fd" ? GammaBackend::FD : GammaBackend::Kernel;
  o.picard_theta = s.backend == "picard";
  out.mild = solve_type2(std::get<TypeIIProblem>(ap), g, o);
  return out;
}

inline std::string problem_name(const ExperimentConfig& c) { return data_of(c.problem).name; }

// Max relative error against the closed form on |x|, |xi| <= R/2. A
// collapsed xi axis is compared at xi = 0.
inline double closed_form_error(const ThetaField& th, const ClosedForm& cf) {
  const TriangleGrid& g = th.grid;
  const UniformAxis ax = g.axis();
  double err = 0, sup = 0;
  for (int j = 0; j <= g.Ns; ++j)
    for (int i = 0; i <= j; ++i)
      for (int k = 0; k < th.n_xi; ++k) {
        const double xi = th.n_xi == 1 ? 0.0 : ax.at(k);
        if (std::abs(xi) > 0.5 * g.R) continue;
        for (int l = 0; l < g.Nx; ++l) {
          if (std::abs(ax.at(l)) > 0.5 * g.R) continue;
          const double ex = cf(g.s(i), g.s(j), xi, ax.at(l));
          err = std::max(err, std::abs(th.at(i, j, k, l) - ex));
          sup = std::max(sup, std::abs(ex));
        }
      }
  return err / std::max(sup, 1e-300);
}

// max |coarse - fine| over the coarse nodes in |x| <= R/2; the fine grid
// doubles both resolutions.
inline double successive_difference(const ThetaField& c, const ThetaField& f) {
  const TriangleGrid& g = c.grid;
  const UniformAxis ax = g.axis();
  double e = 0;
  for (int j = 0; j <= g.Ns; ++j)
    for (int i = 0; i <= j; ++i)
      for (int k = 0; k < c.n_xi; ++k)
        for (int l = 0; l < g.Nx; ++l) {
          if (std::abs(ax.at(l)) > 0.5 * g.R || (c.n_xi > 1 && std::abs(ax.at(k)) > 0.5 * g.R)) continue;
          e = std::max(e, std::abs(c.at(i, j, k, l) - f.at(2 * i, 2 * j, c.n_xi > 1 ? 2 * k : 0, 2 * l)));
        }
  return e;
}

inline int pipeline_convergence(const ExperimentConfig& c, int levels, const std::filesystem::path& dir, Manifest& man,
                                std::ostream& log) {
  const std::string hash = config_hash(c);
  const auto entry = find_catalog(problem_name(c));
  const bool exact = entry && entry->closed_form && c.problem_text.rfind("problem.catalog", 0) == 0;
  const int extra = exact ? 0 : 1;
  const int div0 = 1 << (levels - 1);
  if (c.grid.Ns % div0 != 0 || (c.grid.Nx - 1) % div0 != 0 || (c.grid.Nx - 1) / div0 < 4)
    fail(ErrorCode::ConfigInvalid, "grid.Ns and grid.Nx - 1 must be divisible by 2^(refine-1)");
  std::vector<TriangleGrid> grids;
  for (int r = 0; r < levels + extra; ++r) {
    const int Ns = r < levels ? c.grid.Ns / (div0 >> r) : 2 * c.grid.Ns;
    const int Nx = r < levels ? (c.grid.Nx - 1) / (div0 >> r) + 1 : 2 * (c.grid.Nx - 1) + 1;
    grids.push_back(TriangleGrid::make(data_of(c.problem).T, Ns, c.grid.R, Nx, c.grid.alpha));
  }
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Solved> sols;
  for (const auto& g : grids) sols.push_back(solve_any(c.problem, g, c.solver));
  man.stage("solve", seconds_since(t0));
  std::vector<double> hs, errs;
  const std::string path = (dir / "convergence.csv").string();
  {
    CsvWriter w(path, hash, {"level", "Ns", "Nx", "ds", "h", "error", "order"});
    for (int r = 0; r < levels; ++r) {
      const double e = exact ? closed_form_error(sols[r].field(), entry->closed_form)
                             : successive_difference(sols[r].field(), sols[r + 1].field());
      hs.push_back(grids[r].ds());
      errs.push_back(e);
      const std::string order =
          r == 0 || errs[r] <= 0 || errs[r - 1] <= 0 ? "" : format_double(std::log(errs[r - 1] / errs[r]) / std::log(2.0));
      w.row(r, grids[r].Ns, grids[r].Nx, grids[r].ds(), grids[r].h(), e, order);
      log << "level " << r << " Ns=" << grids[r].Ns << " Nx=" << grids[r].Nx << " error=" << format_double(e)
          << (order.empty() ? "" : " order=" + order) << "\n";
    }
  }
  man.file(path);
  bool positive = true;
  for (double e : errs) positive = positive && e > 0;
  const double order = positive && levels > 1 ? loglog_slope(hs, errs) : 0.0;
  man.j["fitted_order"] = order;
  man.j["reference"] = exact ? "closed form" : "next finer grid";
  log << "fitted order " << format_double(order) << "\n";
  return kExitPass;
}

inline int pipeline_solve(const ExperimentConfig& c, const std::filesystem::path& dir, Manifest& man, std::ostream& log) {
  const std::string hash = config_hash(c);
  const TriangleGrid g = TriangleGrid::make(data_of(c.problem).T, c.grid.Ns, c.grid.R, c.grid.Nx, c.grid.alpha);
  const auto t0 = std::chrono::steady_clock::now();
  const Solved s = solve_any(c.problem, g, c.solver);
  man.stage("solve", seconds_since(t0));
  const std::string field = (dir / (s.mild ? "mild_solution.bin" : "theta.bin")).string();
  if (s.mild)
    write_mild_solution(field, *s.mild, hash);
  else
    write_theta(field, *s.theta, hash);
  const std::string diag = (dir / "diagonal.csv").string();
  write_diagonal_csv(diag, s.field(), hash);
  man.file(field);
  man.file(diag);
  log << "wrote " << field << " and " << diag << "\n";
  return kExitPass;
}

inline int pipeline_verify(const ExperimentConfig& c, const std::filesystem::path& dir, Manifest& man, std::ostream& log) {
  const std::string hash = config_hash(c);
  const ProblemData& pd = data_of(c.problem);
  const TriangleGrid g = TriangleGrid::make(pd.T, c.grid.Ns, c.grid.R, c.grid.Nx, c.grid.alpha);
  if (g.Ns % c.ensemble.steps != 0) fail(ErrorCode::ConfigInvalid, "grid.Ns must be a multiple of ensemble.steps");
  auto t0 = std::chrono::steady_clock::now();
  const Solved s = solve_any(c.problem, g, c.solver);
  man.stage("solve", seconds_since(t0));
  t0 = std::chrono::steady_clock::now();
  SimulateOptions so;
  so.antithetic = c.ensemble.antithetic;
  const double x0 = c.ensemble.x0;
  const PathEnsemble ens =
      simulate(pd.model, std::span<const double>(&x0, 1), TimeGrid::uniform(pd.T, c.ensemble.steps), c.ensemble.paths,
               c.ensemble.seed, so);
  man.stage("simulate", seconds_since(t0));
  t0 = std::chrono::steady_clock::now();
  const PathEvaluator ev =
      s.mild ? type2_evaluator(*s.mild, pd.model, ens) : type1_evaluator(*s.theta, pd.model, ens);
  const ResidualStats br = bsvie_residual(pd, ev, ens, s.mild.has_value());
  std::optional<ResidualStats> mr;
  if (s.mild) mr = msolution_residual(ev, ens);
  man.stage("residuals", seconds_since(t0));
  const std::string path = (dir / "residuals.csv").string();
  {
    CsvWriter w(path, hash, {"kind", "knot", "t", "rms", "stderr"});
    for (int k = 0; k < ens.n_times(); ++k) w.row("bsvie", k, ens.grid.knots[k], br.knot_rms[k], br.knot_stderr[k]);
    if (mr)
      for (int k = 0; k < ens.n_times(); ++k) w.row("msolution", k, ens.grid.knots[k], mr->knot_rms[k], mr->knot_stderr[k]);
  }
  man.file(path);
  bool pass = br.rms <= c.residual_tol;
  man.j["verify"]["bsvie_rms"] = br.rms;
  man.j["verify"]["paths_used"] = br.n_used;
  log << "bsvie residual rms " << format_double(br.rms) << " (tol " << format_double(c.residual_tol) << ")\n";
  if (mr) {
    man.j["verify"]["msolution_rms"] = mr->rms;
    man.j["verify"]["msolution_bias"] = mr->max_bias;
    log << "M-solution residual rms " << format_double(mr->rms) << "\n";
    pass = pass && mr->rms <= c.residual_tol;
  }
  const auto entry = find_catalog(pd.name);
  if (entry && entry->closed_form && c.problem_text.rfind("problem.catalog", 0) == 0) {
    const double rel = closed_form_error(s.field(), entry->closed_form);
    man.j["verify"]["closed_form_rel_error"] = rel;
    log << "closed-form relative error " << format_double(rel) << "\n";
    pass = pass && rel <= 1e-3;
  }
  man.j["verify"]["pass"] = pass;
  return pass ? kExitPass : kExitVerifyFail;
}

inline int suite_acceptance(const RunOptions& o, const std::filesystem::path& dir, Manifest& man, std::ostream& log) {
  AcceptanceOptions ao;
  if (o.seed) ao.seed = *o.seed;
  bool all = true;
  std::vector<CriterionResult> rs;
  ao.on_result = [&](const CriterionResult& r) {
    log << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << " (" << r.name << "): " << r.detail << "\n";
    log.flush();
  };
  rs = run_acceptance(ao);
  const std::string path = (dir / "acceptance.csv").string();
  {
    CsvWriter w(path, hex64(fnv1a("suite=acceptance seed=" + std::to_string(ao.seed))), {"criterion", "name", "pass", "detail"});
    for (const auto& r : rs) {
      w.row(r.id, "\"" + r.name + "\"", r.pass ? "1" : "0", "\"" + r.detail + "\"");
      man.stage("criterion_" + std::to_string(r.id), r.seconds);
      all = all && r.pass;
    }
  }
  man.file(path);
  return all ? kExitPass : kExitVerifyFail;
}

inline ExperimentConfig experiment_from_options(const RunOptions& o) {
  ExperimentConfig c;
  if (!o.config.empty()) {
    c = load_experiment(o.config);
  } else {
    if (o.problem.empty()) fail(ErrorCode::ConfigInvalid, "one of --config, --problem or --suite is required");
    c = parse_experiment("problem.catalog = " + o.problem + "\n");
  }
  if (!o.backend.empty()) {
    if (o.backend != "fd" && o.backend != "picard" && o.backend != "kernel")
      fail(ErrorCode::ConfigInvalid, "--backend must be fd, picard or kernel");
    c.solver.backend = o.backend;
  }
  if (o.seed) c.ensemble.seed = *o.seed;
  if (o.refine > 0) c.pipeline = "convergence";
  return c;
}

}  // namespace detail

// Runs one batch; returns the process exit code.
inline int run(const RunOptions& o, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  default_threads() = std::max(1, o.threads);
  const std::filesystem::path dir(o.out);
  detail::Manifest man;
  int code = kExitPass;
  try {
    std::filesystem::create_directories(dir);
    if (!o.suite.empty()) {
      if (o.suite != "acceptance") fail(ErrorCode::ConfigInvalid, "unknown suite '" + o.suite + "'");
      man.j["suite"] = o.suite;
      code = detail::suite_acceptance(o, dir, man, log);
    } else {
      const ExperimentConfig c = detail::experiment_from_options(o);
      const std::string hash = config_hash(c);
      man.j["config_hash"] = hash;
      man.j["problem"] = detail::problem_name(c);
      man.j["pipeline"] = c.pipeline;
      man.j["backend"] = c.solver.backend;
      std::ofstream(dir / "config.txt") << experiment_to_config(c);
      log << "config " << hash << " problem " << detail::problem_name(c) << " pipeline " << c.pipeline << "\n";
      if (c.pipeline == "convergence")
        code = detail::pipeline_convergence(c, o.refine > 0 ? o.refine : 4, dir, man, log);
      else if (c.pipeline == "solve")
        code = detail::pipeline_solve(c, dir, man, log);
      else
        code = detail::pipeline_verify(c, dir, man, log);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    man.j["error"] = e.what();
    code = e.code() == ErrorCode::ConfigInvalid ? kExitConfig : kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  try {
    man.write(dir, code);
  } catch (const std::exception&) {
  }
  return code;
}

}  // namespace bsvie
