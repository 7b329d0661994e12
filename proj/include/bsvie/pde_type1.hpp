#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "detail/cn.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "util.hpp"

namespace bsvie {

// Read-only view of the active slices at one s-level during the march.
struct LevelView {
  const TriangleGrid* grid = nullptr;
  int j = 0;
  int n_xi = 1, m = 1;
  const double* data = nullptr;  // [i][k][c][l], i = 0..j
  std::span<const double> row(int i, int k, int c = 0) const {
    const std::size_t blk = static_cast<std::size_t>(n_xi) * m * grid->Nx;
    return {data + i * blk + (static_cast<std::size_t>(n_xi == 1 ? 0 : k) * m + c) * grid->Nx,
            static_cast<std::size_t>(grid->Nx)};
  }
};

using LevelObserver = std::function<void(const LevelView&)>;

// zeta(i_t, j_s, k_xi) written to out (m*d entries).
using ZetaProvider = std::function<void(int i, int j, int k, std::span<double> out)>;

struct FdOptions {
  bool store_full = true;
  std::size_t max_field_doubles = 200'000'000;
  LevelObserver observer;
  int threads = 0;
};

namespace detail {

struct RowScratch {
  std::vector<double> y, z, f_next, f_cur, expl, work, x;
};

inline RowScratch& scratch() {
  thread_local RowScratch s;
  return s;
}

// Generator evaluated along one x-row; z = v_x sigma from the row values.
inline void eval_row(const ProblemData& p, const UniformAxis& ax, const LevelOperator& op, double t, double s,
                     double xi, const double* const* comps, std::span<const double> yrow,
                     std::span<const double> zeta, std::vector<double>& out, RowScratch& sc) {
  const int N = ax.N, m = p.m, d = p.model.d;
  if (static_cast<int>(sc.x.size()) != N || sc.x[0] != ax.lo || sc.x[N - 1] != ax.at(N - 1)) {
    sc.x.resize(N);
    for (int l = 0; l < N; ++l) sc.x[l] = ax.at(l);
  }
  sc.z.resize(static_cast<std::size_t>(N) * m * d);
  const double inv2h = 0.5 / ax.h;
  for (int c = 0; c < m && p.g.uses_z; ++c) {
    const double* r = comps[c];
    std::span<const double> rs(r, static_cast<std::size_t>(N));
    if (m == 1 && d == 1) {
      double* z = sc.z.data();
      const double* sg = op.sigma.data();
      z[0] = diff_x(rs, ax.h, 0) * sg[0];
      for (int l = 1; l < N - 1; ++l) z[l] = (r[l + 1] - r[l - 1]) * inv2h * sg[l];
      z[N - 1] = diff_x(rs, ax.h, N - 1) * sg[N - 1];
      continue;
    }
    for (int l = 0; l < N; ++l) {
      const double vx = diff_x(rs, ax.h, l);
      for (int q = 0; q < d; ++q) sc.z[(static_cast<std::size_t>(l) * m + c) * d + q] = vx * op.sigma[l * d + q];
    }
  }
  out.resize(static_cast<std::size_t>(N) * m);
  RowArgs ra;
  ra.t = t;
  ra.s = s;
  ra.xi = std::span<const double>(&xi, 1);
  ra.x = sc.x;
  ra.y = yrow;
  ra.z = sc.z;
  ra.zeta = zeta;
  ra.out = out;
  p.g.row(ra);
}

// Node-major copy of the diagonal at one level.
inline void diag_node_major(const std::vector<double>& diag, int j, int m, int N, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(N) * m);
  for (int c = 0; c < m; ++c)
    for (int l = 0; l < N; ++l) out[static_cast<std::size_t>(l) * m + c] = diag[(static_cast<std::size_t>(j) * m + c) * N + l];
}

// Backward march in s. Crank-Nicolson in the linear part; the generator is
// explicit with a Heun predictor-corrector: the predictor uses the source
// at s_{j+1} (diagonal u(s_{j+1})), the corrector averages it with the
// source at s_j evaluated on the predicted level.
inline ThetaField march_type1(const ProblemData& p, const TriangleGrid& grid, const FdOptions& opt,
                              const ZetaProvider* zeta, bool xi_dep) {
  if (p.model.n != 1) fail(ErrorCode::GridMismatch, "grid solvers handle n = 1");
  if (std::abs(p.T - grid.T) > 1e-12) fail(ErrorCode::GridMismatch, "grid horizon differs from the problem horizon");
  const int J = grid.Ns, N = grid.Nx, m = p.m, d = p.model.d;
  const int nxi = xi_dep ? N : 1;
  const UniformAxis ax = grid.axis();
  const std::size_t blk = static_cast<std::size_t>(nxi) * m * N;
  if (opt.store_full && grid.pairs() * blk > opt.max_field_doubles)
    fail(ErrorCode::ResourceLimit, "full field needs " + std::to_string(grid.pairs() * blk) +
                                       " doubles; use streaming storage or a coarser grid");
  ThetaField th(grid, m, xi_dep, opt.store_full);
  std::vector<double> cur(static_cast<std::size_t>(J + 1) * blk);
  auto crow = [&](int i, int k, int c) { return cur.data() + i * blk + (static_cast<std::size_t>(k) * m + c) * N; };

  // Terminal level: every slice starts from psi(t_i, xi, x).
  for (int i = 0; i <= J; ++i)
    for (int k = 0; k < nxi; ++k)
      for (int l = 0; l < N; ++l) {
        double xi = ax.at(k), x = ax.at(l), out[64];
        p.psi(grid.s(i), std::span<const double>(&xi, 1), std::span<const double>(&x, 1), std::span<double>(out, m));
        for (int c = 0; c < m; ++c) crow(i, k, c)[l] = out[c];
      }
  auto store_level = [&](int j) {
    for (int c = 0; c < m; ++c)
      for (int l = 0; l < N; ++l) th.diagonal(j, c)[l] = crow(j, xi_dep ? l : 0, c)[l];
    for (double v : th.diagonal(j))
      if (!std::isfinite(v)) fail(ErrorCode::NonFiniteField, "non-finite value at s=" + std::to_string(grid.s(j)));
    if (opt.store_full)
      for (int i = 0; i <= j; ++i) std::copy_n(cur.data() + i * blk, blk, th.values.data() + ThetaField::pair(i, j) * blk);
    if (opt.observer) opt.observer(LevelView{&grid, j, nxi, m, cur.data()});
  };
  store_level(J);
  if (J == 0) return th;

  LevelOperator op_next, op_cur;
  op_next.build(p.model, grid.s(J), ax);
  ImplicitSolver solver;
  std::vector<double> u_next, u_cur;
  std::vector<double> pred_j(blk), expl_j(blk), fnext_j(blk);
  const int md = m * d;
  const std::size_t mN = static_cast<std::size_t>(m) * N;

  for (int j = J - 1; j >= 0; --j) {
    const double s0 = grid.s(j), s1 = grid.s(j + 1), dt = s1 - s0;
    op_cur.build(p.model, s0, ax);
    solver.factor(op_cur, 0.5 * dt, N);
    diag_node_major(th.diag, j + 1, m, N, u_next);

    // Predictor for slice i, xi rows k0..k1-1, from the level j+1 values in
    // cur. Buffers hold (k - k0) * m * N entries each.
    auto predict = [&](int i, int k0, int k1, double* pred, double* expl, double* fnext, RowScratch& sc) {
      double* rows[512];
      int nr = 0;
      for (int k = k0; k < k1; ++k) {
        double zt[64];
        std::span<const double> zs;
        if (zeta) {
          (*zeta)(i, j + 1, k, std::span<double>(zt, md));
          zs = std::span<const double>(zt, md);
        }
        const double* v[64];
        for (int c = 0; c < m; ++c) v[c] = crow(i, k, c);
        eval_row(p, ax, op_next, grid.s(i), s1, ax.at(k), v, u_next, zs, sc.f_next, sc);
        const std::size_t off = (k - k0) * mN;
        for (int c = 0; c < m; ++c) {
          double* e = expl + off + static_cast<std::size_t>(c) * N;
          double* pr = pred + off + static_cast<std::size_t>(c) * N;
          double* fn = fnext + off + static_cast<std::size_t>(c) * N;
          op_next.apply_explicit(v[c], 0.5 * dt, e, N);
          for (int l = 0; l < N; ++l) fn[l] = sc.f_next[static_cast<std::size_t>(l) * m + c];
          for (int l = 1; l < N - 1; ++l) pr[l] = e[l] + dt * fn[l];
          rows[nr++] = pr;
        }
      }
      solver.solve_many(rows, nr);
    };
    // Corrector writing level j into cur.
    auto correct = [&](int i, int k0, int k1, const double* pred, const double* expl, const double* fnext,
                       const std::vector<double>& ucur, RowScratch& sc) {
      double* rows[512];
      int nr = 0;
      for (int k = k0; k < k1; ++k) {
        double zt[64];
        std::span<const double> zs;
        if (zeta) {
          (*zeta)(i, j, k, std::span<double>(zt, md));
          zs = std::span<const double>(zt, md);
        }
        const std::size_t off = (k - k0) * mN;
        const double* pc[64];
        for (int c = 0; c < m; ++c) pc[c] = pred + off + static_cast<std::size_t>(c) * N;
        eval_row(p, ax, op_cur, grid.s(i), s0, ax.at(k), pc, ucur, zs, sc.f_cur, sc);
        for (int c = 0; c < m; ++c) {
          double* o = crow(i, k, c);
          const double* e = expl + off + static_cast<std::size_t>(c) * N;
          const double* fn = fnext + off + static_cast<std::size_t>(c) * N;
          for (int l = 1; l < N - 1; ++l) o[l] = e[l] + 0.5 * dt * (fn[l] + sc.f_cur[static_cast<std::size_t>(l) * m + c]);
          rows[nr++] = o;
        }
      }
      solver.solve_many(rows, nr);
    };
    const int kb = std::max(1, 8 / m);
    const int nblocks = (nxi + kb - 1) / kb;

    // Slice i = j reaches its diagonal at this level; predict it first.
    parallel_for(static_cast<std::size_t>(nblocks), [&](std::size_t bb) {
      const int k0 = static_cast<int>(bb) * kb, k1 = std::min(nxi, k0 + kb);
      const std::size_t off = k0 * mN;
      predict(j, k0, k1, pred_j.data() + off, expl_j.data() + off, fnext_j.data() + off, scratch());
    }, opt.threads);
    u_cur.resize(static_cast<std::size_t>(N) * m);
    for (int c = 0; c < m; ++c)
      for (int l = 0; l < N; ++l)
        u_cur[static_cast<std::size_t>(l) * m + c] = pred_j[(static_cast<std::size_t>(xi_dep ? l : 0) * m + c) * N + l];
    parallel_for(static_cast<std::size_t>(nblocks), [&](std::size_t bb) {
      const int k0 = static_cast<int>(bb) * kb, k1 = std::min(nxi, k0 + kb);
      const std::size_t off = k0 * mN;
      correct(j, k0, k1, pred_j.data() + off, expl_j.data() + off, fnext_j.data() + off, u_cur, scratch());
    }, opt.threads);
    for (int c = 0; c < m; ++c)
      for (int l = 0; l < N; ++l) u_cur[static_cast<std::size_t>(l) * m + c] = crow(j, xi_dep ? l : 0, c)[l];

    // Remaining slices in blocks of xi rows.
    parallel_for(static_cast<std::size_t>(j) * nblocks, [&](std::size_t idx) {
      const int i = static_cast<int>(idx / nblocks), bb = static_cast<int>(idx % nblocks);
      const int k0 = bb * kb, k1 = std::min(nxi, k0 + kb);
      RowScratch& sc = scratch();
      const std::size_t len = (k1 - k0) * mN;
      sc.work.resize(3 * len);
      double* pred = sc.work.data();
      double* expl = pred + len;
      double* fnext = expl + len;
      predict(i, k0, k1, pred, expl, fnext, sc);
      correct(i, k0, k1, pred, expl, fnext, u_cur, sc);
    }, opt.threads);

    store_level(j);
    std::swap(op_next, op_cur);
  }
  return th;
}

}  // namespace detail

inline ThetaField solve_type1_fd(const TypeIProblem& p, const TriangleGrid& grid, const FdOptions& opt = {}) {
  return detail::march_type1(p, grid, opt, nullptr, p.xi_dependent);
}

// Discrete residual Theta_s + L Theta + g at interior nodes (i < j < Ns,
// 0 < l < Nx-1); zero elsewhere. Central differences throughout.
inline ThetaField pde_residual(const ThetaField& th, const ProblemData& p, const ZetaProvider* zeta = nullptr) {
  th.require_full("pde_residual");
  const TriangleGrid& g = th.grid;
  const UniformAxis ax = g.axis();
  const int N = g.Nx, m = th.m, d = p.model.d, md = m * d;
  ThetaField res(g, m, th.xi_dependent(), true);
  detail::LevelOperator op;
  std::vector<double> y, f;
  detail::RowScratch sc;
  for (int j = 1; j < g.Ns; ++j) {
    op.build(p.model, g.s(j), ax);
    detail::diag_node_major(th.diag, j, m, N, y);
    const double dt = g.s(j + 1) - g.s(j - 1);
    for (int i = 0; i < j; ++i)
      for (int k = 0; k < th.n_xi; ++k) {
        double zt[64];
        std::span<const double> zs;
        if (zeta) {
          (*zeta)(i, j, k, std::span<double>(zt, md));
          zs = std::span<const double>(zt, md);
        }
        const double* comps[64];
        for (int c = 0; c < m; ++c) comps[c] = th.row(i, j, k, c);
        detail::eval_row(p, ax, op, g.s(i), g.s(j), ax.at(k), comps, y, zs, f, sc);
        for (int c = 0; c < m; ++c) {
          const double* v = th.row(i, j, k, c);
          const double* vp = th.row(i, j + 1, k, c);
          const double* vm = th.row(i, j - 1, k, c);
          double* r = res.row(i, j, k, c);
          for (int l = 1; l < N - 1; ++l) {
            const double Lv = op.lo[l] * v[l - 1] + op.di[l] * v[l] + op.up[l] * v[l + 1];
            r[l] = (vp[l] - vm[l]) / dt + Lv + f[static_cast<std::size_t>(l) * m + c];
          }
        }
      }
  }
  return res;
}

inline double max_abs(const ThetaField& th) {
  double r = 0;
  for (double v : th.values) r = std::max(r, std::abs(v));
  return r;
}

// Standalone semilinear solver for u_s + L u + g(s, x, u, u_x sigma) = 0,
// u(T) = h: the Feynman-Kac PDE of a Markovian BSDE. Same time stepping as
// the Type-I march, but the generator sees the local value u(s, x).
using LocalGenerator = std::function<double(double s, double x, double y, double z)>;

inline Field2D solve_feynman_kac_fd(const SdeModel& M, const std::function<double(double)>& h, const LocalGenerator& g,
                                    const TriangleGrid& grid) {
  const int J = grid.Ns, N = grid.Nx;
  const UniformAxis ax = grid.axis();
  Field2D u(grid.knots(), ax, 1);
  for (int l = 0; l < N; ++l) u.at(J, l) = h(ax.at(l));
  detail::LevelOperator op1, op0;
  detail::ImplicitSolver solver;
  op1.build(M, grid.s(J), ax);
  std::vector<double> e(N), f1(N), pr(N), f0(N);
  for (int j = J - 1; j >= 0; --j) {
    const double s0 = grid.s(j), s1 = grid.s(j + 1), dt = s1 - s0;
    op0.build(M, s0, ax);
    solver.factor(op0, 0.5 * dt, N);
    auto v = u.row(j + 1);
    for (int l = 0; l < N; ++l) f1[l] = g(s1, ax.at(l), v[l], diff_x(v, ax.h, l) * op1.sigma[l]);
    op1.apply_explicit(v.data(), 0.5 * dt, e.data(), N);
    for (int l = 1; l < N - 1; ++l) pr[l] = e[l] + dt * f1[l];
    solver.solve(pr.data());
    for (int l = 0; l < N; ++l) f0[l] = g(s0, ax.at(l), pr[l], diff_x(pr, ax.h, l) * op0.sigma[l]);
    auto out = u.row(j);
    for (int l = 1; l < N - 1; ++l) out[l] = e[l] + 0.5 * dt * (f1[l] + f0[l]);
    solver.solve(out.data());
    std::swap(op0, op1);
  }
  return u;
}

}  // namespace bsvie
