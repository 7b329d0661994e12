#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "detail/cn.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "pde_type1.hpp"
#include "repr.hpp"
#include "sde.hpp"

namespace bsvie {

struct Partition {
  std::vector<double> knots;
  std::vector<int> index;  // solver knot index of each partition knot

  static Partition from_indices(const TriangleGrid& g, std::vector<int> idx) {
    if (idx.size() < 2 || idx.front() != 0 || idx.back() != g.Ns)
      fail(ErrorCode::GridMismatch, "partition must start at 0 and end at T");
    Partition p;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (k > 0 && idx[k] <= idx[k - 1]) fail(ErrorCode::GridMismatch, "partition knots must increase");
      p.knots.push_back(g.s(idx[k]));
    }
    p.index = std::move(idx);
    return p;
  }
  static Partition uniform(const TriangleGrid& g, int N) {
    if (N < 1 || g.Ns % N != 0) fail(ErrorCode::GridMismatch, "partition size must divide the solver step count");
    std::vector<int> idx;
    for (int k = 0; k <= N; ++k) idx.push_back(k * (g.Ns / N));
    return from_indices(g, std::move(idx));
  }

  int N() const { return static_cast<int>(knots.size()) - 1; }
  double mesh() const {
    double r = 0;
    for (int k = 0; k < N(); ++k) r = std::max(r, knots[k + 1] - knots[k]);
    return r;
  }
  // k with t_k <= t < t_{k+1}; T belongs to the last interval.
  int interval(double t) const {
    auto it = std::upper_bound(knots.begin(), knots.end(), t + 1e-12);
    return std::clamp(static_cast<int>(it - knots.begin()) - 1, 0, N() - 1);
  }
  int interval_of_index(int j) const {
    auto it = std::upper_bound(index.begin(), index.end(), j);
    return std::clamp(static_cast<int>(it - index.begin()) - 1, 0, N() - 1);
  }
  double tau(double t) const { return knots[interval(t)]; }
  double tau_bar(double t) const {
    auto it = std::lower_bound(knots.begin(), knots.end(), t - 1e-12);
    return it == knots.end() ? knots.back() : *it;
  }
};

// Theta^k(s, xi, x) on [t_k, T] for each partition interval k.
struct CascadeField {
  TriangleGrid grid;
  Partition pi;
  int m = 1, n_xi = 1;
  std::vector<std::vector<double>> levels;  // per k: [j - index[k]][xi][c][l]
  std::vector<std::vector<double>> diag;    // per k: [j - index[k]][c][l]
  std::vector<double> jumps;                // sup_x |Theta^k - Theta^{k-1}| at (t_k, x, x), k = 1..N-1

  std::size_t blk() const { return static_cast<std::size_t>(n_xi) * m * grid.Nx; }
  const double* row(int k, int j, int kxi, int c = 0) const {
    return levels[k].data() + static_cast<std::size_t>(j - pi.index[k]) * blk() +
           (static_cast<std::size_t>(n_xi == 1 ? 0 : kxi) * m + c) * grid.Nx;
  }
  std::span<const double> row_span(int k, int j, int kxi, int c = 0) const {
    return {row(k, j, kxi, c), static_cast<std::size_t>(grid.Nx)};
  }
  double value(int k, int j, double xi, double x, int c = 0) const {
    const UniformAxis ax = grid.axis();
    if (n_xi == 1) return interp_linear(row_span(k, j, 0, c), ax, x);
    auto [q, w] = ThetaField::locate(ax, xi);
    return (1 - w) * interp_linear(row_span(k, j, q, c), ax, x) + w * interp_linear(row_span(k, j, q + 1, c), ax, x);
  }
  double dx(int k, int j, double xi, double x, int c = 0) const {
    const UniformAxis ax = grid.axis();
    auto rowdx = [&](int q) {
      auto r = row_span(k, j, q, c);
      auto [l, w] = ThetaField::locate(ax, x);
      return (1 - w) * diff_x(r, ax.h, l) + w * diff_x(r, ax.h, l + 1);
    };
    if (n_xi == 1) return rowdx(0);
    auto [q, w] = ThetaField::locate(ax, xi);
    return (1 - w) * rowdx(q) + w * rowdx(q + 1);
  }
  std::span<const double> diagonal(int k, int j, int c = 0) const {
    return {diag[k].data() + (static_cast<std::size_t>(j - pi.index[k]) * m + c) * grid.Nx,
            static_cast<std::size_t>(grid.Nx)};
  }
  // Assembled Theta^Pi(t_i, s_j, xi, x).
  double assembled(int i, int j, double xi, double x, int c = 0) const {
    return value(pi.interval_of_index(i), j, xi, x, c);
  }
};

// Solves Theta^k for k = N-1 down to 0. On [t_l, t_{l+1}) with l > k the
// generator sees the stored diagonal of Theta^l; on [t_k, t_{k+1}) it sees
// the diagonal of Theta^k itself. Same Heun/Crank-Nicolson step as the
// Type-I march, with the branch l fixed at both ends of each step.
inline CascadeField build_cascade(const TypeIProblem& p, const Partition& pi, const TriangleGrid& grid,
                                  int threads = 0) {
  if (p.model.n != 1) fail(ErrorCode::GridMismatch, "grid solvers handle n = 1");
  if (std::abs(p.T - grid.T) > 1e-12) fail(ErrorCode::GridMismatch, "grid horizon differs from the problem horizon");
  if (pi.index.back() != grid.Ns) fail(ErrorCode::GridMismatch, "partition is not aligned with the grid");
  const int J = grid.Ns, N = grid.Nx, m = p.m, K = pi.N();
  const UniformAxis ax = grid.axis();
  CascadeField cf;
  cf.grid = grid;
  cf.pi = pi;
  cf.m = m;
  cf.n_xi = p.xi_dependent ? N : 1;
  const int nxi = cf.n_xi;
  const std::size_t blk = cf.blk();
  cf.levels.resize(K);
  cf.diag.resize(K);

  std::vector<detail::LevelOperator> ops(J + 1);
  for (int j = 0; j <= J; ++j) ops[j].build(p.model, grid.s(j), ax);
  std::vector<detail::ImplicitSolver> solvers(J);
  for (int j = 0; j < J; ++j) solvers[j].factor(ops[j], 0.5 * (grid.s(j + 1) - grid.s(j)), N);

  for (int k = K - 1; k >= 0; --k) {
    const int j0 = pi.index[k];
    const double tk = pi.knots[k];
    auto& lv = cf.levels[k];
    auto& dg = cf.diag[k];
    lv.assign(static_cast<std::size_t>(J - j0 + 1) * blk, 0.0);
    dg.assign(static_cast<std::size_t>(J - j0 + 1) * m * N, 0.0);
    auto lrow = [&](int j, int q, int c) {
      return lv.data() + static_cast<std::size_t>(j - j0) * blk + (static_cast<std::size_t>(q) * m + c) * N;
    };
    auto set_diag = [&](int j) {
      for (int c = 0; c < m; ++c)
        for (int l = 0; l < N; ++l)
          dg[(static_cast<std::size_t>(j - j0) * m + c) * N + l] = lrow(j, nxi == 1 ? 0 : l, c)[l];
    };
    // Node-major y at level j from interval l's diagonal.
    auto y_from = [&](int l, int j, std::vector<double>& out) {
      out.resize(static_cast<std::size_t>(N) * m);
      for (int c = 0; c < m; ++c) {
        auto d = cf.diagonal(l, j, c);
        for (int q = 0; q < N; ++q) out[static_cast<std::size_t>(q) * m + c] = d[q];
      }
    };
    for (int q = 0; q < nxi; ++q)
      for (int l = 0; l < N; ++l) {
        double xi = ax.at(q), x = ax.at(l), out[64];
        p.psi(tk, std::span<const double>(&xi, 1), std::span<const double>(&x, 1), std::span<double>(out, m));
        for (int c = 0; c < m; ++c) lrow(J, q, c)[l] = out[c];
      }
    set_diag(J);

    std::vector<double> pred(blk), expl(blk), fnext(blk), y_next, y_cur;
    for (int j = J - 1; j >= j0; --j) {
      const double s0 = grid.s(j), s1 = grid.s(j + 1), dt = s1 - s0;
      const int branch = pi.interval_of_index(j);
      y_from(branch, j + 1, y_next);
      parallel_for(static_cast<std::size_t>(nxi), [&](std::size_t qq) {
        const int q = static_cast<int>(qq);
        detail::RowScratch& sc = detail::scratch();
        const double* v[64];
        for (int c = 0; c < m; ++c) v[c] = lrow(j + 1, q, c);
        detail::eval_row(p, ax, ops[j + 1], tk, s1, ax.at(q), v, y_next, {}, sc.f_next, sc);
        const std::size_t off = static_cast<std::size_t>(q) * m * N;
        for (int c = 0; c < m; ++c) {
          double* e = expl.data() + off + static_cast<std::size_t>(c) * N;
          double* pr = pred.data() + off + static_cast<std::size_t>(c) * N;
          double* fn = fnext.data() + off + static_cast<std::size_t>(c) * N;
          ops[j + 1].apply_explicit(v[c], 0.5 * dt, e, N);
          for (int l = 0; l < N; ++l) fn[l] = sc.f_next[static_cast<std::size_t>(l) * m + c];
          for (int l = 1; l < N - 1; ++l) pr[l] = e[l] + dt * fn[l];
          solvers[j].solve(pr);
        }
      }, threads);
      if (branch == k) {
        y_cur.resize(static_cast<std::size_t>(N) * m);
        for (int c = 0; c < m; ++c)
          for (int l = 0; l < N; ++l)
            y_cur[static_cast<std::size_t>(l) * m + c] =
                pred[(static_cast<std::size_t>(nxi == 1 ? 0 : l) * m + c) * N + l];
      } else {
        y_from(branch, j, y_cur);
      }
      parallel_for(static_cast<std::size_t>(nxi), [&](std::size_t qq) {
        const int q = static_cast<int>(qq);
        detail::RowScratch& sc = detail::scratch();
        const std::size_t off = static_cast<std::size_t>(q) * m * N;
        const double* pc[64];
        for (int c = 0; c < m; ++c) pc[c] = pred.data() + off + static_cast<std::size_t>(c) * N;
        detail::eval_row(p, ax, ops[j], tk, s0, ax.at(q), pc, y_cur, {}, sc.f_cur, sc);
        for (int c = 0; c < m; ++c) {
          double* o = lrow(j, q, c);
          const double* e = expl.data() + off + static_cast<std::size_t>(c) * N;
          const double* fn = fnext.data() + off + static_cast<std::size_t>(c) * N;
          for (int l = 1; l < N - 1; ++l) o[l] = e[l] + 0.5 * dt * (fn[l] + sc.f_cur[static_cast<std::size_t>(l) * m + c]);
          solvers[j].solve(o);
        }
      }, threads);
      set_diag(j);
      for (int c = 0; c < m; ++c)
        for (double v : cf.diagonal(k, j, c))
          if (!std::isfinite(v)) fail(ErrorCode::NonFiniteField, "non-finite cascade value at s=" + std::to_string(s0));
    }
  }
  cf.jumps.assign(std::max(0, K - 1), 0.0);
  for (int k = 1; k < K; ++k)
    for (int c = 0; c < m; ++c) {
      auto a = cf.diagonal(k, pi.index[k], c), b = cf.diagonal(k - 1, pi.index[k], c);
      for (int l = 0; l < N; ++l) cf.jumps[k - 1] = std::max(cf.jumps[k - 1], std::abs(a[l] - b[l]));
    }
  return cf;
}

namespace detail {

inline std::vector<int> partition_on_ensemble(const Partition& pi, const PathEnsemble& ens) {
  std::vector<int> out;
  for (double t : pi.knots) {
    int found = -1;
    for (int j = 0; j < ens.n_times(); ++j)
      if (std::abs(ens.grid.knots[j] - t) < 1e-9) found = j;
    if (found < 0) fail(ErrorCode::GridMismatch, "ensemble grid does not contain partition knot " + format_double(t));
    out.push_back(found);
  }
  return out;
}

}  // namespace detail

// Y(s) = Theta^Pi(s,s,X(tau(s)),X(s)), Z(t,s) = Theta^Pi_x(t,s,X(tau(t)),X(s)) sigma(s,X(s)).
inline PathEvaluator cascade_evaluator(const CascadeField& cf, const SdeModel& M, const PathEnsemble& ens) {
  auto idx = std::make_shared<std::vector<int>>(map_knots(cf.grid, ens));
  auto pk = std::make_shared<std::vector<int>>(detail::partition_on_ensemble(cf.pi, ens));
  return [&cf, &M, &ens, idx, pk](int first, std::span<PathSolution> blk) {
    const int nt = ens.n_times(), m = cf.m, d = M.d;
    thread_local std::vector<detail::PathCache> cache;
    detail::prepare_block(M, ens, first, blk, cf.grid, m, true, false, cache);
    auto branch = [&](int i) { return cf.pi.interval_of_index((*idx)[i]); };
    for (std::size_t b = 0; b < blk.size(); ++b) {
      PathSolution& out = blk[b];
      if (!out.inside) continue;
      const int p = first + static_cast<int>(b);
      const std::vector<double>& sig = cache[b].sig;
      for (int j = 0; j < nt; ++j) {
        const double xs = ens.x(p, j);
        const int kj = branch(j);
        const double xtau = ens.x(p, (*pk)[kj]);
        for (int c = 0; c < m; ++c) out.y(j)[c] = cf.value(kj, (*idx)[j], xtau, xs, c);
        for (int i = 0; i <= j; ++i) {
          const int ki = branch(i);
          const double xi = ens.x(p, (*pk)[ki]);
          double* z = out.zu(i, j);
          for (int c = 0; c < m; ++c) {
            const double vx = cf.dx(ki, (*idx)[j], xi, xs, c);
            for (int q = 0; q < d; ++q) z[c * d + q] = vx * sig[static_cast<std::size_t>(j) * d + q];
          }
        }
      }
    }
  };
}

inline SolutionPair evaluate_cascade(const CascadeField& cf, const SdeModel& M, const PathEnsemble& ens) {
  return collect(cascade_evaluator(cf, M, ens), ens, "cascade N=" + std::to_string(cf.pi.N()));
}

struct CascadeErrorReport {
  int N = 0;
  double mesh = 0;
  double l2_y = 0, l2_z = 0, l2 = 0;  // E int |Y^Pi - Y|^2 dt and E int int |Z^Pi - Z|^2 ds dt
  double adjacent = 0;                // max_k sqrt(E sup_s |Y^{k+1}(s) - Y^k(s)|^2)
  double mean_jump = 0;               // mean over paths and internal knots of |Y^Pi(t_k) - Y^Pi(t_k - 0)|
  double max_field_jump = 0;
  int n_used = 0, n_excluded = 0;
};

// Discrete L^2 distance between the cascade pair and the pair from a
// reference Type-I field on the same ensemble.
inline CascadeErrorReport cascade_error(const CascadeField& cf, const ThetaField& reference, const SdeModel& M,
                                        const PathEnsemble& ens) {
  const PathEvaluator ec = cascade_evaluator(cf, M, ens);
  const PathEvaluator er = type1_evaluator(reference, M, ens);
  const auto idx = map_knots(cf.grid, ens);
  const auto pk = detail::partition_on_ensemble(cf.pi, ens);
  const int nt = ens.n_times(), J = nt - 1, m = cf.m, K = cf.pi.N();
  const int P = ens.n_paths;
  struct PerPath {
    double ly = 0, lz = 0, jump = 0;
    std::vector<double> adj;
    bool used = true;
  };
  std::vector<PerPath> pp(P);
  const int nb = (P + kPathBlock - 1) / kPathBlock;
  parallel_for(static_cast<std::size_t>(nb), [&](std::size_t bb) {
    thread_local std::vector<PathSolution> ba, bbuf;
    const int first = static_cast<int>(bb) * kPathBlock, cnt = std::min(kPathBlock, P - first);
    ba.resize(kPathBlock);
    bbuf.resize(kPathBlock);
    ec(first, std::span<PathSolution>(ba.data(), cnt));
    er(first, std::span<PathSolution>(bbuf.data(), cnt));
    for (int q = 0; q < cnt; ++q) {
      const int p = first + q;
      const PathSolution& a = ba[q];
      const PathSolution& b = bbuf[q];
      PerPath& r = pp[p];
      if (!a.inside || !b.inside) {
        r.used = false;
        continue;
      }
      const int md = m * a.d;
      for (int j = 0; j < J; ++j) {
        const double dt = ens.grid.dt(j);
        for (int c = 0; c < m; ++c) r.ly += (a.y(j)[c] - b.y(j)[c]) * (a.y(j)[c] - b.y(j)[c]) * dt;
        for (int i = 0; i <= j; ++i) {
          const double dti = ens.grid.dt(i);
          for (int u = 0; u < md; ++u) r.lz += (a.zu(i, j)[u] - b.zu(i, j)[u]) * (a.zu(i, j)[u] - b.zu(i, j)[u]) * dt * dti;
        }
      }
      for (int k = 1; k < K; ++k) {
        const int jk = pk[k];
        const double xs = ens.x(p, jk), xprev = ens.x(p, pk[k - 1]);
        double jm = 0;
        for (int c = 0; c < m; ++c) {
          const double left = cf.value(k - 1, idx[jk], xprev, xs, c);
          jm += (a.y(jk)[c] - left) * (a.y(jk)[c] - left);
        }
        r.jump += std::sqrt(jm);
      }
      r.adj.assign(std::max(0, K - 1), 0.0);
      for (int k = 0; k + 1 < K; ++k) {
        const double xa = ens.x(p, pk[k + 1]), xb = ens.x(p, pk[k]);
        for (int j = pk[k + 1]; j <= J; ++j) {
          double dd = 0;
          for (int c = 0; c < m; ++c) {
            const double v = cf.value(k + 1, idx[j], xa, ens.x(p, j), c) - cf.value(k, idx[j], xb, ens.x(p, j), c);
            dd += v * v;
          }
          r.adj[k] = std::max(r.adj[k], dd);
        }
      }
    }
  });
  CascadeErrorReport rep;
  rep.N = K;
  rep.mesh = cf.pi.mesh();
  std::vector<double> adj(std::max(0, K - 1), 0.0);
  for (const auto& r : pp) {
    if (!r.used) {
      ++rep.n_excluded;
      continue;
    }
    ++rep.n_used;
    rep.l2_y += r.ly;
    rep.l2_z += r.lz;
    rep.mean_jump += r.jump;
    for (std::size_t k = 0; k < adj.size(); ++k) adj[k] += r.adj[k];
  }
  check_exclusions(static_cast<std::size_t>(rep.n_excluded), static_cast<std::size_t>(P));
  if (rep.n_used > 0) {
    rep.l2_y /= rep.n_used;
    rep.l2_z /= rep.n_used;
    rep.l2 = rep.l2_y + rep.l2_z;
    if (K > 1) rep.mean_jump /= static_cast<double>(rep.n_used) * (K - 1);
    for (double v : adj) rep.adjacent = std::max(rep.adjacent, std::sqrt(v / rep.n_used));
  }
  for (double v : cf.jumps) rep.max_field_jump = std::max(rep.max_field_jump, v);
  return rep;
}

}  // namespace bsvie
