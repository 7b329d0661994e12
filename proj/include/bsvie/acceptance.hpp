#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cascade.hpp"
#include "catalog.hpp"
#include "kernel.hpp"
#include "norms.hpp"
#include "pde_type1.hpp"
#include "pde_type2.hpp"
#include "picard.hpp"
#include "repr.hpp"
#include "sde.hpp"

namespace bsvie {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

struct AcceptanceOptions {
  int paths = 10000;
  std::uint64_t seed = 20240607;
  std::vector<int> only;  // empty: all criteria
  std::function<void(const CriterionResult&)> on_result;
};

namespace detail {

inline std::string sfmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class P>
P catalog_problem(const std::string& name) {
  const auto e = find_catalog(name);
  if (!e) fail(ErrorCode::ConfigInvalid, "no catalog entry '" + name + "'");
  return std::get<P>(e->problem);
}

// max |a - b| over nodes with |x|, |xi| <= half the domain.
inline double interior_diff(const ThetaField& a, const ThetaField& b) {
  const TriangleGrid& g = a.grid;
  const UniformAxis ax = g.axis();
  const double lim = 0.5 * g.R;
  double e = 0;
  for (int j = 0; j <= g.Ns; ++j)
    for (int i = 0; i <= j; ++i)
      for (int k = 0; k < a.n_xi; ++k) {
        if (a.n_xi > 1 && std::abs(ax.at(k)) > lim) continue;
        for (int c = 0; c < a.m; ++c)
          for (int l = 0; l < g.Nx; ++l)
            if (std::abs(ax.at(l)) <= lim) e = std::max(e, std::abs(a.at(i, j, k, l, c) - b.at(i, j, k, l, c)));
      }
  return e;
}

}  // namespace detail

// Closed-form catalog problems on Ns=200, Nx=401, R=8.
inline CriterionResult acceptance_closed_forms() {
  using namespace detail;
  CriterionResult r{1, "closed-form oracle suite", true, "", 0};
  const TriangleGrid g = TriangleGrid::make(1.0, 200, 8.0, 401);
  const UniformAxis ax = g.axis();
  for (const std::string name :
       {"heat-terminal-x", "constant-generator", "diagonal-exponential", "t-linear-generator", "type2-unit-zeta"}) {
    const CatalogEntry e = *find_catalog(name);
    double err = 0, sup = 0, observer_s = 0;
    const auto t0 = std::chrono::steady_clock::now();
    // A collapsed xi axis is compared at xi = 0.
    auto visit = [&](int i, int j, int k, std::span<const double> row) {
      for (int l = 0; l < g.Nx; ++l) {
        const double ex = e.closed_form(g.s(i), g.s(j), ax.at(k), ax.at(l));
        err = std::max(err, std::abs(row[l] - ex));
        sup = std::max(sup, std::abs(ex));
      }
    };
    if (const auto* p1 = std::get_if<TypeIProblem>(&e.problem)) {
      const ThetaField th = solve_type1_fd(*p1, g);
      const auto t1 = std::chrono::steady_clock::now();
      for (int j = 0; j <= g.Ns; ++j)
        for (int i = 0; i <= j; ++i)
          for (int k = 0; k < th.n_xi; ++k) visit(i, j, th.n_xi == 1 ? (g.Nx - 1) / 2 : k, th.row_span(i, j, k, 0));
      observer_s = seconds_since(t1);
    } else {
      Type2Options o;
      o.fd.store_full = false;
      o.on_iteration = [&](int) { err = sup = 0; };
      o.fd.observer = [&](const LevelView& v) {
        const auto t1 = std::chrono::steady_clock::now();
        for (int i = 0; i <= v.j; ++i)
          for (int k = 0; k < v.n_xi; ++k) visit(i, v.j, v.n_xi == 1 ? (g.Nx - 1) / 2 : k, v.row(i, k));
        observer_s += seconds_since(t1);
      };
      solve_type2(std::get<TypeIIProblem>(e.problem), g, o);
    }
    const double secs = seconds_since(t0) - observer_s, rel = err / sup;
    const bool ok = rel <= 1e-3 && secs <= 120;
    r.pass = r.pass && ok;
    r.detail += sfmt("%s rel=%.2e t=%.1fs%s; ", name.c_str(), rel, secs, ok ? "" : " FAIL");
  }
  return r;
}

// g = g(s,y,z), psi = h(x): Theta is constant in (t, xi) and its diagonal is
// the Markovian BSDE's Feynman-Kac solution.
inline CriterionResult acceptance_bsde_reduction() {
  using namespace detail;
  CriterionResult r{2, "BSDE reduction", false, "", 0};
  const TypeIProblem p = catalog_problem<TypeIProblem>("bsde-reduction");

  // Full (t, xi) solve, streamed: spread of Theta(t,s,xi,x) over t and xi.
  const TriangleGrid gv = TriangleGrid::make(1.0, 100, 8.0, 201);
  FdOptions fo;
  fo.store_full = false;
  double spread = 0;
  fo.observer = [&](const LevelView& v) {
    for (int l = 0; l < gv.Nx; ++l) {
      double lo = 1e300, hi = -1e300;
      for (int i = 0; i <= v.j; ++i)
        for (int k = 0; k < v.n_xi; ++k) {
          const double u = v.row(i, k)[l];
          lo = std::min(lo, u);
          hi = std::max(hi, u);
        }
      spread = std::max(spread, hi - lo);
    }
  };
  detail::march_type1(p, gv, fo, nullptr, true);
  const double tol_v = gv.ds() * gv.ds() + gv.h() * gv.h();

  const TriangleGrid g = TriangleGrid::make(1.0, 200, 8.0, 401);
  const ThetaField th = solve_type1_fd(p, g);
  auto h = [&p](double x) {
    double out;
    p.psi(0.0, std::span<const double>(&x, 1), std::span<const double>(&x, 1), std::span<double>(&out, 1));
    return out;
  };
  auto loc = [&p](double s, double x, double y, double z) {
    GenArgs a;
    a.t = s;
    a.s = s;
    a.xi = std::span<const double>(&x, 1);
    a.x = std::span<const double>(&x, 1);
    a.y = std::span<const double>(&y, 1);
    a.z = std::span<const double>(&z, 1);
    double out;
    p.g(a, std::span<double>(&out, 1));
    return out;
  };
  const Field2D fk = solve_feynman_kac_fd(p.model, h, loc, g);
  double diff = 0;
  for (int j = 0; j <= g.Ns; ++j)
    for (int l = 0; l < g.Nx; ++l) diff = std::max(diff, std::abs(th.diagonal(j)[l] - fk.at(j, l)));
  r.pass = spread <= 10 * tol_v && diff <= 1e-4;
  r.detail = sfmt("spread over (t,xi)=%.2e (limit %.2e on %dx%d); diagonal vs Feynman-Kac=%.2e (limit 1e-4)", spread,
                  10 * tol_v, gv.Ns, gv.Nx, diff);
  return r;
}

inline CriterionResult acceptance_cascade() {
  using namespace detail;
  CriterionResult r{3, "cascade rates", false, "", 0};
  const TypeIProblem p = catalog_problem<TypeIProblem>("nonlinear-t");
  const TriangleGrid g = TriangleGrid::make(1.0, 128, 8.0, 321);
  const auto t0 = std::chrono::steady_clock::now();
  const ThetaField ref = solve_type1_fd(p, g);
  const double x0 = 0;
  const PathEnsemble ens = simulate(p.model, std::span<const double>(&x0, 1), TimeGrid::uniform(1.0, 64), 2000, 7);
  std::vector<double> mesh, l2, jump;
  for (int N : {4, 8, 16, 32}) {
    const CascadeField cf = build_cascade(p, Partition::uniform(g, N), g);
    const CascadeErrorReport e = cascade_error(cf, ref, p.model, ens);
    mesh.push_back(e.mesh);
    l2.push_back(e.l2);
    jump.push_back(e.mean_jump);
    r.detail += sfmt("N=%d L2=%.2e jump=%.2e; ", N, e.l2, e.mean_jump);
  }
  const double sl = loglog_slope(mesh, l2), sj = loglog_slope(mesh, jump), secs = seconds_since(t0);
  r.pass = sl >= 1.7 && sj >= 0.8 && secs <= 600;
  r.detail += sfmt("slope L2=%.3f (>=1.7) jump=%.3f (>=0.8) t=%.1fs", sl, sj, secs);
  return r;
}

namespace detail {

struct ResidualSweep {
  std::vector<double> dts;
  std::vector<PathEnsemble> ens;  // coarse to fine
};

inline ResidualSweep residual_sweep(int paths, std::uint64_t seed) {
  const SdeModel bm = brownian_model();
  const double x0 = 0;
  PathEnsemble fine = simulate(bm, std::span<const double>(&x0, 1), TimeGrid::uniform(1.0, 200), paths, seed);
  ResidualSweep s;
  s.dts = {1.0 / 50, 1.0 / 100, 1.0 / 200};
  s.ens.push_back(coarsen(fine, bm, 4));
  s.ens.push_back(coarsen(fine, bm, 2));
  s.ens.push_back(std::move(fine));
  return s;
}

// Residuals this small mean the pair satisfies the equation exactly on the
// ensemble and no refinement rate exists.
inline constexpr double kExactResidual = 1e-10;

inline std::string rms_text(const std::vector<double>& r) {
  return sfmt("rms=%.2e/%.2e/%.2e", r[0], r[1], r[2]);
}

}  // namespace detail

// bsvie_residual over the catalog and M-residual checks share the Type-II
// solutions, so criteria 4 and 5 run together.
inline std::vector<CriterionResult> acceptance_representation(int paths, std::uint64_t seed) {
  using namespace detail;
  CriterionResult c4{4, "representation residuals", true, "", 0}, c5{5, "M-solution constraint", true, "", 0};
  double t4 = 0, t5 = 0;
  auto t0 = std::chrono::steady_clock::now();
  const ResidualSweep sw = residual_sweep(paths, seed);
  t4 += seconds_since(t0);

  auto judge4 = [&](const std::string& name, const std::vector<double>& rms, const char* rule) {
    const double slope = loglog_slope(sw.dts, rms);
    bool ok = rms[2] <= 5e-2;
    std::string verdict;
    if (rms[2] <= kExactResidual) {
      verdict = "exact";
    } else if (std::string(rule) == "rate") {
      ok = ok && std::abs(slope - 0.5) <= 0.15;
      verdict = sfmt("slope=%.3f", slope);
    } else {
      ok = ok && slope >= 0.35;
      verdict = sfmt("slope=%.3f (deterministic quadrature error)", slope);
    }
    c4.pass = c4.pass && ok;
    c4.detail += name + " " + rms_text(rms) + " " + verdict + (ok ? "" : " FAIL") + "; ";
  };

  const TriangleGrid g1 = TriangleGrid::make(1.0, 200, 8.0, 401);
  for (const auto& [name, rule] : std::vector<std::pair<std::string, const char*>>{{"heat-terminal-x", "rate"},
                                                                                  {"constant-generator", "rate"},
                                                                                  {"diagonal-exponential", "riemann"},
                                                                                  {"t-linear-generator", "riemann"},
                                                                                  {"heat-terminal-sin", "rate"}}) {
    t0 = std::chrono::steady_clock::now();
    const TypeIProblem p = catalog_problem<TypeIProblem>(name);
    const ThetaField th = solve_type1_fd(p, g1);
    std::vector<double> rms;
    for (const auto& E : sw.ens) rms.push_back(bsvie_residual(p, type1_evaluator(th, p.model, E), E, false).rms);
    judge4(name, rms, rule);
    t4 += seconds_since(t0);
  }

  const TriangleGrid g2 = TriangleGrid::make(1.0, 200, 6.0, 97);
  for (const std::string name : {"type2-unit-zeta", "type2-sin-zeta"}) {
    t0 = std::chrono::steady_clock::now();
    const TypeIIProblem p = catalog_problem<TypeIIProblem>(name);
    const MildSolution sol = solve_type2(p, g2);
    std::vector<double> rms, mrms;
    double bias = 0;
    for (const auto& E : sw.ens) {
      const PathEvaluator ev = type2_evaluator(sol, p.model, E);
      rms.push_back(bsvie_residual(p, ev, E, true).rms);
      const auto t1 = std::chrono::steady_clock::now();
      const ResidualStats ms = msolution_residual(ev, E);
      t5 += seconds_since(t1);
      mrms.push_back(ms.rms);
      bias = ms.max_bias;
    }
    judge4(name, rms, "rate");
    const double ms = loglog_slope(sw.dts, mrms);
    bool ok;
    if (mrms[2] <= kExactResidual) {
      ok = true;
      c5.detail += name + " M " + rms_text(mrms) + sfmt(" exact, Ito-sum bias=%.2e; ", bias);
    } else {
      ok = std::abs(ms - 0.5) <= 0.15;
      c5.detail += name + " M " + rms_text(mrms) + sfmt(" slope=%.3f%s; ", ms, ok ? "" : " FAIL");
    }
    c5.pass = c5.pass && ok;
    t4 += seconds_since(t0);
  }

  t0 = std::chrono::steady_clock::now();
  const SdeModel bm = brownian_model();
  const GammaField G = gamma_from_function(g1, [](double, double x) { return x * x; }, bm, GammaBackend::FD);
  std::vector<double> mrms;
  for (const auto& E : sw.ens) mrms.push_back(msolution_residual(gamma_evaluator(G, bm, E), E).rms);
  const PathEnsemble& fine = sw.ens.back();
  double zerr = 0;
  for_each_path(gamma_evaluator(G, bm, fine), fine.n_paths, [&](int p, const PathSolution& ps) {
    if (!ps.inside) return;
    double e = 0;
    for (int i = 0; i < fine.n_times(); ++i)
      for (int j = 0; j <= i; ++j) e = std::max(e, std::abs(ps.zl(i, j)[0] - 2 * fine.x(p, j)));
    zerr = std::max(zerr, e);
  });
  const double ms = loglog_slope(sw.dts, mrms);
  const bool ok = std::abs(ms - 0.5) <= 0.15 && zerr <= 1e-3;
  c5.pass = c5.pass && ok;
  c5.detail += "x^2 probe M " + rms_text(mrms) + sfmt(" slope=%.3f, |Z_lower - 2X|=%.2e%s", ms, zerr, ok ? "" : " FAIL");
  t5 += seconds_since(t0);
  c4.seconds = t4;
  c5.seconds = t5;
  return {c4, c5};
}

inline CriterionResult acceptance_kernel() {
  using namespace detail;
  CriterionResult r{6, "kernel suite", true, "", 0};
  const UniformAxis ax{-20.0, 40.0 / 4000, 4001};
  for (const KernelParams kp : {KernelParams{0.5, 0.0}, KernelParams{0.8, 0.3}}) {
    double mass = 0, ck = 0;
    for (double dt : {0.01, 0.1, 1.0})
      for (double x : {-1.0, 0.0, 2.0}) mass = std::max(mass, std::abs(kernel_mass(0.0, x, dt, ax, kp) - 1));
    for (double r1 : {0.25, 0.5, 0.75})
      for (double eta : {-0.7, 0.0, 1.3}) ck = std::max(ck, chapman_kolmogorov_error(0.0, 0.2, r1, 1.0, eta, ax, kp));
    const KernelBoundReport b = fit_kernel_bounds(kp);
    const bool bounded = std::isfinite(b.K0) && std::isfinite(b.K1) && std::isfinite(b.K2) && b.lambda <= b.lambda_fit;
    const bool ok = mass <= 1e-6 && ck <= 1e-5 && bounded;
    r.pass = r.pass && ok;
    r.detail += sfmt("a=%.1f b=%.1f mass err=%.1e CK err=%.1e K0=%.3f K1=%.3f K2=%.3f at lambda=%.3f, fitted lambda=%.4f%s; ",
                     kp.a, kp.b, mass, ck, b.K0, b.K1, b.K2, b.lambda, b.lambda_fit, ok ? "" : " FAIL");
  }
  return r;
}

inline CriterionResult acceptance_picard() {
  using namespace detail;
  CriterionResult r{7, "Picard machinery", true, "", 0};
  const TriangleGrid g = TriangleGrid::make(1.0, 64, 8.0, 161);
  const TypeIProblem nl = catalog_problem<TypeIProblem>("nonlinear-t");

  const PicardResult pr = solve_type1_picard(nl, g);
  double worst = 0;
  for (const auto& w : pr.windows)
    for (double q : w.ratios) worst = std::max(worst, q);
  const bool ok_ratio = worst < 1;
  r.detail += sfmt("windows=%zu max update ratio=%.3f; ", pr.windows.size(), worst);

  const ContractionSample full = measure_contraction(nl, g, g.Ns, 3), half = measure_contraction(nl, g, g.Ns / 2, 3);
  const bool ok_half = half.ratio < full.ratio;
  r.detail += sfmt("contraction W=%.2f: %.3f, W=%.2f: %.3f; ", full.window, full.ratio, half.window, half.ratio);

  double agree = interior_diff(pr.field, solve_type1_fd(nl, g));
  r.detail += sfmt("picard-fd nonlinear-t=%.2e", agree);
  for (const std::string name : {"diagonal-exponential", "heat-terminal-sin"}) {
    const TypeIProblem p = catalog_problem<TypeIProblem>(name);
    const double d = interior_diff(solve_type1_picard(p, g).field, solve_type1_fd(p, g));
    r.detail += sfmt(" %s=%.2e", name.c_str(), d);
    agree = std::max(agree, d);
  }
  const bool ok_agree = agree <= 2e-3;

  const TypeIIProblem t2 = catalog_problem<TypeIIProblem>("type2-sin-zeta");
  Type2Options o;
  o.max_iter = 15;
  int iters = 0;
  bool ok_outer = true;
  try {
    iters = static_cast<int>(solve_type2(t2, TriangleGrid::make(1.0, 64, 6.0, 97), o).log.size());
  } catch (const Error&) {
    ok_outer = false;
  }
  r.detail += sfmt("; outer Type-II iterations=%d (<=15)", iters);
  r.pass = ok_ratio && ok_half && ok_agree && ok_outer;
  return r;
}

inline CriterionResult acceptance_window_scaling() {
  using namespace detail;
  CriterionResult r{8, "window-scaling probes", true, "", 0};
  const KernelParams kp{0.5, 0.0};
  const std::vector<double> windows{0.5, 0.25, 0.125};
  for (const auto& [label, f] : std::vector<std::pair<std::string, std::function<double(double, double)>>>{
           {"f=1", [](double, double) { return 1.0; }}, {"f=sin x", [](double, double x) { return std::sin(x); }}}) {
    const ProbeReport rep = window_scaling_probe(kp, f, windows);
    double sx = 0;
    for (const auto& row : rep.rows) sx = std::max(sx, row.sup_x);
    const std::string vx = sx < 1e-12 ? "|v_x|0=0" : sfmt("|v_x|0 slope=%.3f (>=%.2f)", rep.slope_sup_x, rep.expo_sup_x);
    r.pass = r.pass && rep.pass;
    r.detail += sfmt("%s: |v|0 slope=%.3f (>=%.2f) |v|1+a slope=%.3f (>=%.2f) %s%s; ", label.c_str(), rep.slope_sup,
                     rep.expo_sup, rep.slope_holder, rep.expo_holder, vx.c_str(), rep.pass ? "" : " FAIL");
  }
  // sup of the exact solution 2 (1 - exp(-w/2)) sin x for f = sin x.
  std::vector<double> exact;
  for (double w : windows) exact.push_back(2 * (1 - std::exp(-w / 2)));
  r.detail += sfmt("exact |v|0 slope for f=sin x=%.3f", loglog_slope(windows, exact));
  return r;
}

inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& o = {}) {
  auto wanted = [&](int id) { return o.only.empty() || std::find(o.only.begin(), o.only.end(), id) != o.only.end(); };
  std::vector<CriterionResult> out;
  auto emit = [&](CriterionResult r) {
    if (o.on_result) o.on_result(r);
    out.push_back(std::move(r));
  };
  auto timed = [&](int id, const std::string& name, const std::function<CriterionResult()>& fn) {
    if (!wanted(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = fn();
    } catch (const Error& e) {
      r = {id, name, false, std::string("error: ") + e.what(), 0};
    }
    if (r.seconds == 0) r.seconds = detail::seconds_since(t0);
    emit(std::move(r));
  };
  timed(1, "closed-form oracle suite", acceptance_closed_forms);
  timed(2, "BSDE reduction", acceptance_bsde_reduction);
  timed(3, "cascade rates", acceptance_cascade);
  if (wanted(4) || wanted(5)) {
    std::vector<CriterionResult> rs;
    try {
      rs = acceptance_representation(o.paths, o.seed);
    } catch (const Error& e) {
      rs = {{4, "representation residuals", false, std::string("error: ") + e.what(), 0},
            {5, "M-solution constraint", false, std::string("error: ") + e.what(), 0}};
    }
    for (auto& r : rs)
      if (wanted(r.id)) emit(std::move(r));
  }
  timed(6, "kernel suite", acceptance_kernel);
  timed(7, "Picard machinery", acceptance_picard);
  timed(8, "window-scaling probes", acceptance_window_scaling);
  return out;
}

}  // namespace bsvie
