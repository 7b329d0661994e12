#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "pde_type2.hpp"
#include "sde.hpp"
#include "util.hpp"

namespace bsvie {

// (Y, Z) along one path on the ensemble knots. Zu holds Z(t_i, s_j) for
// i <= j; Zl holds Z(t_i, s_j) for j <= i, the diagonal included.
struct PathSolution {
  int n_times = 0, m = 1, d = 1;
  bool has_upper = true, has_lower = false, inside = true;
  std::vector<double> Y, Zu, Zl;

  static std::size_t upair(int i, int j) { return static_cast<std::size_t>(j) * (j + 1) / 2 + i; }
  static std::size_t lpair(int i, int j) { return static_cast<std::size_t>(i) * (i + 1) / 2 + j; }
  std::size_t tri() const { return static_cast<std::size_t>(n_times) * (n_times + 1) / 2; }

  void reset(int nt, int comps, int dims, bool upper, bool lower) {
    n_times = nt;
    m = comps;
    d = dims;
    has_upper = upper;
    has_lower = lower;
    inside = true;
    Y.assign(static_cast<std::size_t>(nt) * m, 0.0);
    Zu.assign(upper ? tri() * m * d : 0, 0.0);
    Zl.assign(lower ? tri() * m * d : 0, 0.0);
  }
  double* y(int j) { return Y.data() + static_cast<std::size_t>(j) * m; }
  const double* y(int j) const { return Y.data() + static_cast<std::size_t>(j) * m; }
  double* zu(int i, int j) { return Zu.data() + upair(i, j) * m * d; }
  const double* zu(int i, int j) const { return Zu.data() + upair(i, j) * m * d; }
  double* zl(int i, int j) { return Zl.data() + lpair(i, j) * m * d; }
  const double* zl(int i, int j) const { return Zl.data() + lpair(i, j) * m * d; }
};

// Evaluates paths first .. first + out.size() - 1. Blocks of paths share
// each field row while it is in cache.
using PathEvaluator = std::function<void(int first, std::span<PathSolution> out)>;

inline constexpr int kPathBlock = 32;

struct SolutionPair {
  int n_paths = 0, n_times = 0, m = 1, d = 1;
  bool has_lower = false;
  std::string provenance;
  std::vector<PathSolution> paths;
  std::vector<int> excluded;
};

// Ensemble knot j -> solver knot index.
inline std::vector<int> map_knots(const TriangleGrid& g, const PathEnsemble& ens) {
  if (std::abs(ens.grid.T() - g.T) > 1e-12) fail(ErrorCode::GridMismatch, "ensemble horizon differs from the grid");
  std::vector<int> idx(ens.n_times());
  for (int j = 0; j < ens.n_times(); ++j) {
    const double t = ens.grid.knots[j];
    const int k = static_cast<int>(std::lround(t / g.ds()));
    if (k < 0 || k > g.Ns || std::abs(g.s(k) - t) > 1e-9)
      fail(ErrorCode::GridMismatch, "ensemble knot " + format_double(t) + " is not a solver knot");
    idx[j] = k;
  }
  return idx;
}

namespace detail {

inline bool path_inside(const PathEnsemble& ens, int p, double R) {
  for (int j = 0; j < ens.n_times(); ++j)
    if (!(std::abs(ens.x(p, j)) <= R)) return false;
  return true;
}

// Per-path data shared by the evaluators: sigma(s_j, X(s_j)) and the cell
// of X(s_j) on the solver axis.
struct PathCache {
  std::vector<double> sig;
  std::vector<ThetaField::Loc> loc;

  void fill(const SdeModel& M, const PathEnsemble& ens, int p, const UniformAxis& ax) {
    const int nt = ens.n_times();
    sig.resize(static_cast<std::size_t>(nt) * M.d);
    loc.resize(nt);
    for (int j = 0; j < nt; ++j) {
      const double x = ens.x(p, j);
      M.sigma(ens.grid.knots[j], std::span<const double>(&x, 1),
              std::span<double>(sig.data() + static_cast<std::size_t>(j) * M.d, M.d));
      loc[j] = ThetaField::loc(ax, x);
    }
  }
};

// Marks paths leaving [-R, R] and fills caches for the rest.
inline void prepare_block(const SdeModel& M, const PathEnsemble& ens, int first, std::span<PathSolution> out,
                          const TriangleGrid& g, int m, bool upper, bool lower, std::vector<PathCache>& cache) {
  cache.resize(out.size());
  for (std::size_t b = 0; b < out.size(); ++b) {
    const int p = first + static_cast<int>(b);
    out[b].reset(ens.n_times(), m, M.d, upper, lower);
    out[b].inside = path_inside(ens, p, g.R);
    if (out[b].inside) cache[b].fill(M, ens, p, g.axis());
  }
}

}  // namespace detail

// Y(s) = Theta(s,s,X(s),X(s)), Z(t,s) = Theta_x(t,s,X(t),X(s)) sigma(s,X(s)).
inline PathEvaluator type1_evaluator(const ThetaField& th, const SdeModel& M, const PathEnsemble& ens) {
  th.require_full("path evaluation");
  auto idx = std::make_shared<std::vector<int>>(map_knots(th.grid, ens));
  return [&th, &M, &ens, idx](int first, std::span<PathSolution> out) {
    const int nt = ens.n_times(), m = th.m, d = M.d;
    thread_local std::vector<detail::PathCache> cache;
    detail::prepare_block(M, ens, first, out, th.grid, m, true, false, cache);
    for (int j = 0; j < nt; ++j) {
      const int gj = (*idx)[j];
      for (std::size_t b = 0; b < out.size(); ++b) {
        if (!out[b].inside) continue;
        for (int c = 0; c < m; ++c) out[b].y(j)[c] = th.value(gj, gj, cache[b].loc[j], cache[b].loc[j], c);
      }
      for (int i = 0; i <= j; ++i) {
        const int gi = (*idx)[i];
        for (std::size_t b = 0; b < out.size(); ++b) {
          if (!out[b].inside) continue;
          const auto& C = cache[b];
          double* z = out[b].zu(i, j);
          for (int c = 0; c < m; ++c) {
            const double vx = th.dx(gi, gj, C.loc[i], C.loc[j], c);
            for (int q = 0; q < d; ++q) z[c * d + q] = vx * C.sig[static_cast<std::size_t>(j) * d + q];
          }
        }
      }
    }
  };
}

namespace detail {

// Z(t_i, s_j) = Gamma_x(t_i, s_j, X(s_j)) sigma(s_j, X(s_j)) for j <= i.
inline void fill_lower(const GammaField& G, const std::vector<int>& idx, int nt, int d, std::span<PathSolution> out,
                       const std::vector<PathCache>& cache) {
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j <= i; ++j)
      for (std::size_t b = 0; b < out.size(); ++b) {
        if (!out[b].inside) continue;
        const auto& C = cache[b];
        double* z = out[b].zl(i, j);
        for (int c = 0; c < G.m; ++c) {
          const double gx = G.dx(idx[i], idx[j], C.loc[j], c);
          for (int q = 0; q < d; ++q) z[c * d + q] = gx * C.sig[static_cast<std::size_t>(j) * d + q];
        }
      }
}

}  // namespace detail

// Type-I evaluation plus Z(t,s) = Gamma_x(t,s,X(s)) sigma(s,X(s)) for s <= t.
inline PathEvaluator type2_evaluator(const MildSolution& sol, const SdeModel& M, const PathEnsemble& ens) {
  PathEvaluator upper = type1_evaluator(sol.theta, M, ens);
  auto idx = std::make_shared<std::vector<int>>(map_knots(sol.theta.grid, ens));
  return [&sol, &M, &ens, idx, upper](int first, std::span<PathSolution> out) {
    upper(first, out);
    thread_local std::vector<detail::PathCache> cache;
    cache.resize(out.size());
    for (std::size_t b = 0; b < out.size(); ++b) {
      out[b].has_lower = true;
      out[b].Zl.assign(out[b].tri() * sol.gamma.m * M.d, 0.0);
      if (out[b].inside) cache[b].fill(M, ens, first + static_cast<int>(b), sol.gamma.grid.axis());
    }
    detail::fill_lower(sol.gamma, *idx, ens.n_times(), M.d, out, cache);
  };
}

// Y(t) = Gamma(t,t,X(t)) = Lambda(t,X(t)) and the lower triangle from Gamma;
// the upper triangle is absent.
inline PathEvaluator gamma_evaluator(const GammaField& G, const SdeModel& M, const PathEnsemble& ens) {
  auto idx = std::make_shared<std::vector<int>>(map_knots(G.grid, ens));
  return [&G, &M, &ens, idx](int first, std::span<PathSolution> out) {
    thread_local std::vector<detail::PathCache> cache;
    detail::prepare_block(M, ens, first, out, G.grid, G.m, false, true, cache);
    for (std::size_t b = 0; b < out.size(); ++b) {
      if (!out[b].inside) continue;
      for (int i = 0; i < ens.n_times(); ++i)
        for (int c = 0; c < G.m; ++c) out[b].y(i)[c] = G.value((*idx)[i], (*idx)[i], cache[b].loc[i], c);
    }
    detail::fill_lower(G, *idx, ens.n_times(), M.d, out, cache);
  };
}

inline void check_exclusions(std::size_t excluded, std::size_t total) {
  if (static_cast<double>(excluded) > 1e-3 * static_cast<double>(total))
    fail(ErrorCode::PathOutsideDomain, std::to_string(excluded) + " of " + std::to_string(total) +
                                           " paths leave the truncated domain");
}

// Runs fn(path, solution) over the ensemble in evaluator blocks.
template <class F>
void for_each_path(const PathEvaluator& ev, int n_paths, F&& fn) {
  const int nb = (n_paths + kPathBlock - 1) / kPathBlock;
  parallel_for(static_cast<std::size_t>(nb), [&](std::size_t bb) {
    thread_local std::vector<PathSolution> buf;
    const int first = static_cast<int>(bb) * kPathBlock, cnt = std::min(kPathBlock, n_paths - first);
    buf.resize(kPathBlock);
    std::span<PathSolution> blk(buf.data(), cnt);
    ev(first, blk);
    for (int b = 0; b < cnt; ++b) fn(first + b, blk[b]);
  });
}

inline SolutionPair collect(const PathEvaluator& ev, const PathEnsemble& ens, std::string provenance) {
  SolutionPair sp;
  sp.n_paths = ens.n_paths;
  sp.n_times = ens.n_times();
  sp.provenance = std::move(provenance);
  sp.paths.resize(ens.n_paths);
  for_each_path(ev, ens.n_paths, [&](int p, const PathSolution& ps) { sp.paths[p] = ps; });
  for (int p = 0; p < ens.n_paths; ++p)
    if (!sp.paths[p].inside) sp.excluded.push_back(p);
  check_exclusions(sp.excluded.size(), static_cast<std::size_t>(ens.n_paths));
  if (!sp.paths.empty()) {
    sp.m = sp.paths[0].m;
    sp.d = sp.paths[0].d;
    sp.has_lower = sp.paths[0].has_lower;
  }
  return sp;
}

inline PathEvaluator pair_evaluator(const SolutionPair& sp) {
  return [&sp](int first, std::span<PathSolution> out) {
    for (std::size_t b = 0; b < out.size(); ++b) out[b] = sp.paths[first + b];
  };
}

struct ResidualStats {
  double rms = 0;        // over included paths, knots and components
  double max_abs = 0;
  std::vector<double> knot_rms, knot_stderr;
  std::vector<double> bias;  // M-residual only: plug-in mean of the Ito sum per knot
  double max_bias = 0;
  int n_used = 0, n_excluded = 0;
};

namespace detail {

// values[p][k][c]; deterministic reduction in path order.
inline ResidualStats reduce_residuals(const std::vector<double>& values, const std::vector<char>& used, int nt, int m) {
  ResidualStats st;
  st.knot_rms.assign(nt, 0.0);
  st.knot_stderr.assign(nt, 0.0);
  const std::size_t P = used.size();
  for (std::size_t p = 0; p < P; ++p) used[p] ? ++st.n_used : ++st.n_excluded;
  if (st.n_used == 0) return st;
  double total = 0;
  for (int k = 0; k < nt; ++k) {
    double s1 = 0, s2 = 0;
    for (std::size_t p = 0; p < P; ++p) {
      if (!used[p]) continue;
      for (int c = 0; c < m; ++c) {
        const double r = values[(p * nt + k) * m + c];
        s1 += r;
        s2 += r * r;
        st.max_abs = std::max(st.max_abs, std::abs(r));
      }
    }
    const double n = static_cast<double>(st.n_used) * m;
    st.knot_rms[k] = std::sqrt(s2 / n);
    const double var = n > 1 ? std::max(0.0, (s2 - s1 * s1 / n) / (n - 1)) : 0.0;
    st.knot_stderr[k] = std::sqrt(var / n);
    total += s2;
  }
  st.rms = std::sqrt(total / (static_cast<double>(st.n_used) * m * nt));
  return st;
}

}  // namespace detail

// R(t) = Y(t) - psi(t,X(t),X(T)) - sum_j g(...) dt_j + sum_j Z(t,r_j) dW_j over r_j >= t,
// left-endpoint sums on the ensemble grid.
inline ResidualStats bsvie_residual(const ProblemData& p, const PathEvaluator& ev, const PathEnsemble& ens,
                                    bool type2) {
  const int nt = ens.n_times(), J = nt - 1, m = p.m, d = p.model.d;
  std::vector<double> values(static_cast<std::size_t>(ens.n_paths) * nt * m, 0.0);
  std::vector<char> used(ens.n_paths, 1);
  for_each_path(ev, ens.n_paths, [&](int path, const PathSolution& ps) {
    const std::size_t pp = static_cast<std::size_t>(path);
    if (!ps.inside) {
      used[pp] = 0;
      return;
    }
    if (type2 && !ps.has_lower) fail(ErrorCode::MissingLowerTriangle, "Type-II residual needs Z below the diagonal");
    std::vector<double> acc(m), out(m), psi(m);
    for (int i = 0; i <= J; ++i) {
      const double xt = ens.x(path, i), xT = ens.x(path, J);
      p.psi(ens.grid.knots[i], std::span<const double>(&xt, 1), std::span<const double>(&xT, 1), psi);
      for (int c = 0; c < m; ++c) acc[c] = ps.y(i)[c] - psi[c];
      for (int j = i; j < J; ++j) {
        const double xs = ens.x(path, j), dt = ens.grid.dt(j);
        GenArgs a;
        a.t = ens.grid.knots[i];
        a.s = ens.grid.knots[j];
        a.xi = std::span<const double>(&xt, 1);
        a.x = std::span<const double>(&xs, 1);
        a.y = std::span<const double>(ps.y(j), m);
        a.z = std::span<const double>(ps.zu(i, j), static_cast<std::size_t>(m) * d);
        if (type2) a.zeta = std::span<const double>(ps.zl(j, i), static_cast<std::size_t>(m) * d);
        p.g(a, out);
        for (int c = 0; c < m; ++c) {
          double ito = 0;
          for (int q = 0; q < d; ++q) ito += ps.zu(i, j)[c * d + q] * ens.dw(path, j, q);
          acc[c] += -out[c] * dt + ito;
        }
      }
      for (int c = 0; c < m; ++c) values[(pp * nt + i) * m + c] = acc[c];
    }
  });
  std::size_t excl = 0;
  for (char u : used) excl += !u;
  check_exclusions(excl, used.size());
  return detail::reduce_residuals(values, used, nt, m);
}

inline ResidualStats bsvie_residual(const ProblemData& p, const SolutionPair& sp, const PathEnsemble& ens) {
  return bsvie_residual(p, pair_evaluator(sp), ens, sp.has_lower);
}

// M(t) = Y(t) - E[Y(t)] - sum_{r_j < t} Z(t,r_j) dW_j. The reported rms
// centres the Ito sum by its own plug-in mean; that mean is reported as bias.
inline ResidualStats msolution_residual(const PathEvaluator& ev, const PathEnsemble& ens) {
  const int nt = ens.n_times(), P = ens.n_paths;
  std::vector<double> Y, S;
  std::vector<char> used(P, 1);
  int m = 0;
  std::vector<PathSolution> tmp_m(1);
  ev(0, std::span<PathSolution>(tmp_m));
  if (!tmp_m[0].has_lower) fail(ErrorCode::MissingLowerTriangle, "M-residual needs Z below the diagonal");
  m = tmp_m[0].m;
  const int d = tmp_m[0].d;
  Y.assign(static_cast<std::size_t>(P) * nt * m, 0.0);
  S.assign(Y.size(), 0.0);
  for_each_path(ev, P, [&](int path, const PathSolution& ps) {
    const std::size_t pp = static_cast<std::size_t>(path);
    if (!ps.inside) {
      used[pp] = 0;
      return;
    }
    for (int i = 0; i < nt; ++i)
      for (int c = 0; c < m; ++c) {
        double ito = 0;
        for (int j = 0; j < i; ++j)
          for (int q = 0; q < d; ++q) ito += ps.zl(i, j)[c * d + q] * ens.dw(static_cast<int>(pp), j, q);
        Y[(pp * nt + i) * m + c] = ps.y(i)[c];
        S[(pp * nt + i) * m + c] = ito;
      }
  });
  std::size_t excl = 0;
  for (char u : used) excl += !u;
  check_exclusions(excl, used.size());
  const double n = static_cast<double>(P - static_cast<int>(excl));
  std::vector<double> ybar(static_cast<std::size_t>(nt) * m, 0.0), sbar(ybar.size(), 0.0);
  for (int p = 0; p < P; ++p) {
    if (!used[p]) continue;
    for (std::size_t q = 0; q < ybar.size(); ++q) {
      ybar[q] += Y[static_cast<std::size_t>(p) * ybar.size() + q];
      sbar[q] += S[static_cast<std::size_t>(p) * ybar.size() + q];
    }
  }
  for (std::size_t q = 0; q < ybar.size(); ++q) {
    ybar[q] /= n;
    sbar[q] /= n;
  }
  std::vector<double> values(Y.size());
  for (int p = 0; p < P; ++p)
    for (std::size_t q = 0; q < ybar.size(); ++q) {
      const std::size_t o = static_cast<std::size_t>(p) * ybar.size() + q;
      values[o] = (Y[o] - ybar[q]) - (S[o] - sbar[q]);
    }
  ResidualStats st = detail::reduce_residuals(values, used, nt, m);
  st.bias.assign(nt, 0.0);
  for (int i = 0; i < nt; ++i)
    for (int c = 0; c < m; ++c) {
      st.bias[i] = std::max(st.bias[i], std::abs(sbar[static_cast<std::size_t>(i) * m + c]));
      st.max_bias = std::max(st.max_bias, st.bias[i]);
    }
  return st;
}

inline ResidualStats msolution_residual(const SolutionPair& sp, const PathEnsemble& ens) {
  if (!sp.has_lower) fail(ErrorCode::MissingLowerTriangle, "M-residual needs Z below the diagonal");
  return msolution_residual(pair_evaluator(sp), ens);
}

// Fitted log-log slope of residual rms against the time step.
inline double refinement_slope(std::span<const double> dts, std::span<const double> rms) {
  return loglog_slope(dts, rms);
}

}  // namespace bsvie
