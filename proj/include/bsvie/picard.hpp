#pragma once

// Kernel-based Picard backend for constant coefficients: on a window
// [S, S_hi] the shifted unknown Theta - Phi (Phi = Theta(., S_hi)) is the
// fixed point of
//   S[th](t,s,xi,x) = int_s^{S_hi} int G(s,x;tau,eta) f(t,tau,xi,eta) deta dtau,
//   f = g(t,tau,xi,eta, theta(tau,tau,eta,eta), theta_eta sigma) + a Phi_xx + b Phi_x.
// Windows are glued backward from T.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "detail/cn.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "model.hpp"
#include "norms.hpp"
#include "pde_type1.hpp"
#include "util.hpp"

namespace bsvie {

struct PicardOptions {
  double initial_delta = 0;  // 0 means T
  double tol = 1e-10;
  int max_iter = 200;
  int max_halvings = 12;
  double ratio_threshold = 0.5;
};

struct WindowLog {
  double S = 0, S_hi = 0;
  int halvings = 0;
  std::vector<double> updates;
  std::vector<double> ratios;
};

struct PicardResult {
  ThetaField field;
  std::vector<WindowLog> windows;
  int total_iterations = 0;
};

namespace detail {

// Levels jlo..jhi; level j holds slices i = 0..j, each a block of
// n_xi * m * Nx values.
struct WindowStore {
  int jlo = 0, jhi = 0;
  std::size_t blk = 0;
  std::vector<std::vector<double>> levels;

  WindowStore(int lo, int hi, std::size_t block) : jlo(lo), jhi(hi), blk(block) {
    for (int j = lo; j <= hi; ++j) levels.emplace_back(static_cast<std::size_t>(j + 1) * block, 0.0);
  }
  double* slice(int i, int j) { return levels[j - jlo].data() + i * blk; }
  const double* slice(int i, int j) const { return levels[j - jlo].data() + i * blk; }

  double max_diff(const WindowStore& o) const {
    double r = 0;
    for (std::size_t q = 0; q < levels.size(); ++q)
      for (std::size_t u = 0; u < levels[q].size(); ++u) r = std::max(r, std::abs(levels[q][u] - o.levels[q][u]));
    return r;
  }
};

struct KernelMap {
  const ProblemData* p = nullptr;
  TriangleGrid grid;
  int nxi = 1;
  int jlo = 0, jhi = 0;
  std::vector<double> phi;   // terminal Theta(t_i, S_hi) for i <= jhi: [i][k][c][l]
  std::vector<double> phiL;  // a Phi_xx + b Phi_x, same layout
  const ZetaProvider* zeta = nullptr;
  double a = 0.5, b = 0;

  std::size_t blk() const { return static_cast<std::size_t>(nxi) * p->m * grid.Nx; }

  void prepare() {
    const int N = grid.Nx;
    phiL.assign(phi.size(), 0.0);
    const double h = grid.h();
    for (std::size_t r = 0; r < phi.size() / N; ++r) {
      std::span<const double> row(phi.data() + r * N, N);
      for (int l = 1; l < N - 1; ++l)
        phiL[r * N + l] = a * (row[l + 1] - 2 * row[l] + row[l - 1]) / (h * h) + b * (row[l + 1] - row[l - 1]) / (2 * h);
    }
  }

  // out = S[in].
  void apply(const WindowStore& in, WindowStore& out) const {
    const int N = grid.Nx, m = p->m, d = p->model.d, md = m * d;
    const UniformAxis ax = grid.axis();
    const std::size_t B = blk();
    const double dt = grid.ds();
    const GaussianSmoother P(ax, b * dt, 2 * a * dt);
    double sig[16];
    {
      double x0 = 0;
      p->model.sigma(0.0, std::span<const double>(&x0, 1), std::span<double>(sig, d));
    }
    // Diagonal of the current iterate at each window level, node-major.
    std::vector<std::vector<double>> diag(jhi - jlo + 1, std::vector<double>(static_cast<std::size_t>(N) * m));
    for (int j = jlo; j <= jhi; ++j)
      for (int c = 0; c < m; ++c)
        for (int l = 0; l < N; ++l) {
          const std::size_t off = (static_cast<std::size_t>(nxi == 1 ? 0 : l) * m + c) * N + l;
          diag[j - jlo][static_cast<std::size_t>(l) * m + c] = phi[j * B + off] + in.slice(j, j)[off];
        }
    parallel_for(static_cast<std::size_t>(jhi + 1) * nxi, [&](std::size_t idx) {
      const int i = static_cast<int>(idx / nxi), k = static_cast<int>(idx % nxi);
      const int jstop = std::max(i, jlo);
      std::vector<double> theta(static_cast<std::size_t>(m) * N), f(static_cast<std::size_t>(N) * m),
          fprev(static_cast<std::size_t>(N) * m), z(static_cast<std::size_t>(N) * md), xs(N), tmp(N), acc(N);
      for (int l = 0; l < N; ++l) xs[l] = ax.at(l);
      const std::size_t off = static_cast<std::size_t>(k) * m * N;
      const double* ph = phi.data() + i * B + off;
      const double* phL = phiL.data() + i * B + off;
      auto source = [&](int j, std::vector<double>& fo) {
        const double* th = in.slice(i, j) + off;
        for (std::size_t u = 0; u < theta.size(); ++u) theta[u] = ph[u] + th[u];
        for (int c = 0; c < m; ++c) {
          std::span<const double> r(theta.data() + static_cast<std::size_t>(c) * N, N);
          for (int l = 0; l < N; ++l) {
            const double vx = diff_x(r, ax.h, l);
            for (int q = 0; q < d; ++q) z[(static_cast<std::size_t>(l) * m + c) * d + q] = vx * sig[q];
          }
        }
        double zt[64];
        std::span<const double> zs;
        if (zeta) {
          (*zeta)(i, j, k, std::span<double>(zt, md));
          zs = std::span<const double>(zt, md);
        }
        const double xi = ax.at(k);
        RowArgs ra;
        ra.t = grid.s(i);
        ra.s = grid.s(j);
        ra.xi = std::span<const double>(&xi, 1);
        ra.x = xs;
        ra.y = diag[j - jlo];
        ra.z = z;
        ra.zeta = zs;
        ra.out = fo;
        p->g.row(ra);
        for (int c = 0; c < m; ++c)
          for (int l = 0; l < N; ++l) fo[static_cast<std::size_t>(l) * m + c] += phL[static_cast<std::size_t>(c) * N + l];
      };
      double* o_top = out.slice(i, jhi) + off;
      std::fill_n(o_top, static_cast<std::size_t>(m) * N, 0.0);
      if (jhi == jstop) return;
      source(jhi, fprev);
      for (int j = jhi - 1; j >= jstop; --j) {
        source(j, f);
        const double* vnext = out.slice(i, j + 1) + off;
        double* vcur = out.slice(i, j) + off;
        for (int c = 0; c < m; ++c) {
          for (int l = 0; l < N; ++l)
            tmp[l] = vnext[static_cast<std::size_t>(c) * N + l] + 0.5 * dt * fprev[static_cast<std::size_t>(l) * m + c];
          P.apply(tmp, acc);
          for (int l = 0; l < N; ++l)
            vcur[static_cast<std::size_t>(c) * N + l] = acc[l] + 0.5 * dt * f[static_cast<std::size_t>(l) * m + c];
        }
        std::swap(f, fprev);
      }
    });
  }
};

inline void fill_terminal_from_psi(const ProblemData& p, const TriangleGrid& g, int nxi, int upto, std::vector<double>& phi) {
  const int N = g.Nx, m = p.m;
  const UniformAxis ax = g.axis();
  phi.assign(static_cast<std::size_t>(upto + 1) * nxi * m * N, 0.0);
  for (int i = 0; i <= upto; ++i)
    for (int k = 0; k < nxi; ++k)
      for (int l = 0; l < N; ++l) {
        double xi = ax.at(k), x = ax.at(l), out[64];
        p.psi(g.s(i), std::span<const double>(&xi, 1), std::span<const double>(&x, 1), std::span<double>(out, m));
        for (int c = 0; c < m; ++c) phi[((static_cast<std::size_t>(i) * nxi + k) * m + c) * N + l] = out[c];
      }
}

inline void check_picard_grid(const ProblemData& p, const TriangleGrid& g) {
  if (p.model.n != 1 || !p.model.constant_coefficients)
    fail(ErrorCode::GridMismatch, "the kernel backend needs scalar constant coefficients");
  if (std::abs(p.T - g.T) > 1e-12) fail(ErrorCode::GridMismatch, "grid horizon differs from the problem horizon");
}

}  // namespace detail

inline PicardResult solve_type1_picard_impl(const ProblemData& p, const TriangleGrid& grid, const PicardOptions& o,
                                           const ZetaProvider* zeta, bool xi_dep) {
  detail::check_picard_grid(p, grid);
  const KernelParams kp = kernel_params(p.model);
  const int J = grid.Ns, N = grid.Nx, m = p.m;
  const int nxi = xi_dep ? N : 1;
  PicardResult res;
  res.field = ThetaField(grid, m, xi_dep, true);
  ThetaField& th = res.field;
  const std::size_t B = th.row_block();
  std::vector<double> phi;
  detail::fill_terminal_from_psi(p, grid, nxi, J, phi);
  for (int i = 0; i <= J; ++i) std::copy_n(phi.data() + i * B, B, th.values.data() + ThetaField::pair(i, J) * B);
  if (J == 0) {
    th.fill_diagonal_from_values();
    return res;
  }
  const double delta0 = o.initial_delta > 0 ? o.initial_delta : grid.T;
  int wsteps = std::max(1, static_cast<int>(std::lround(delta0 / grid.ds())));
  int jhi = J;
  while (jhi > 0) {
    WindowLog log;
    for (;;) {
      const int jlo = std::max(0, jhi - wsteps);
      detail::KernelMap K;
      K.p = &p;
      K.grid = grid;
      K.nxi = nxi;
      K.jlo = jlo;
      K.jhi = jhi;
      K.zeta = zeta;
      K.a = kp.a;
      K.b = kp.b;
      K.phi.assign(phi.begin(), phi.begin() + static_cast<std::ptrdiff_t>((jhi + 1) * B));
      K.prepare();
      detail::WindowStore cur(jlo, jhi, B), nxt(jlo, jhi, B);
      log.S = grid.s(jlo);
      log.S_hi = grid.s(jhi);
      log.updates.clear();
      log.ratios.clear();
      bool converged = false, too_long = false;
      for (int it = 0; it < o.max_iter; ++it) {
        K.apply(cur, nxt);
        const double upd = nxt.max_diff(cur);
        std::swap(cur, nxt);
        ++res.total_iterations;
        log.updates.push_back(upd);
        if (log.updates.size() >= 2) log.ratios.push_back(upd / std::max(log.updates[log.updates.size() - 2], 1e-300));
        if (!std::isfinite(upd)) {
          too_long = true;
          break;
        }
        if (upd < o.tol) {
          converged = true;
          break;
        }
        if (log.updates.size() >= 3 && log.ratios.back() >= o.ratio_threshold) {
          too_long = true;
          break;
        }
      }
      if (converged) {
        for (int j = jlo; j < jhi; ++j)
          for (int i = 0; i <= j; ++i) {
            double* dst = th.values.data() + ThetaField::pair(i, j) * B;
            const double* src = cur.slice(i, j);
            const double* ph = phi.data() + i * B;
            for (std::size_t u = 0; u < B; ++u) dst[u] = ph[u] + src[u];
          }
        for (int i = 0; i <= jlo; ++i) std::copy_n(th.values.data() + ThetaField::pair(i, jlo) * B, B, phi.data() + i * B);
        res.windows.push_back(log);
        jhi = jlo;
        break;
      }
      if (!too_long) fail(ErrorCode::MaxIterExceeded, "Picard window did not converge in " + std::to_string(o.max_iter) + " iterations");
      if (wsteps == 1 || log.halvings >= o.max_halvings)
        fail(ErrorCode::NoContraction, "update ratio stays >= " + format_double(o.ratio_threshold) + " on the shortest window");
      wsteps = std::max(1, wsteps / 2);
      ++log.halvings;
    }
  }
  th.fill_diagonal_from_values();
  return res;
}

inline PicardResult solve_type1_picard(const TypeIProblem& p, const TriangleGrid& grid, const PicardOptions& o = {}) {
  return solve_type1_picard_impl(p, grid, o, nullptr, p.xi_dependent);
}

struct ContractionSample {
  double window = 0;
  double ratio = 0;  // ||S th1 - S th2||_X / ||th1 - th2||_X
};

// Contraction of the window map in the X-norm for random smooth inputs.
inline ContractionSample measure_contraction(const TypeIProblem& p, const TriangleGrid& grid, int window_steps,
                                             std::uint64_t seed) {
  detail::check_picard_grid(p, grid);
  const KernelParams kp = kernel_params(p.model);
  const int J = grid.Ns, N = grid.Nx, m = p.m;
  const int nxi = p.xi_dependent ? N : 1;
  const int jlo = std::max(0, J - window_steps);
  const UniformAxis ax = grid.axis();
  detail::KernelMap K;
  K.p = &p;
  K.grid = grid;
  K.nxi = nxi;
  K.jlo = jlo;
  K.jhi = J;
  K.a = kp.a;
  K.b = kp.b;
  detail::fill_terminal_from_psi(p, grid, nxi, J, K.phi);
  K.prepare();
  const std::size_t B = K.blk();
  auto random_field = [&](std::uint64_t key, detail::WindowStore& w) {
    double amp[4], freq[4], ph[4], kap[4];
    for (int q = 0; q < 4; ++q) {
      amp[q] = 0.5 * counter_normal(seed, key, q, 0);
      freq[q] = 0.5 + std::abs(counter_normal(seed, key, q, 1));
      ph[q] = 3 * counter_normal(seed, key, q, 2);
      kap[q] = counter_normal(seed, key, q, 3);
    }
    for (int j = jlo; j <= J; ++j)
      for (int i = 0; i <= j; ++i)
        for (int k = 0; k < nxi; ++k)
          for (int c = 0; c < m; ++c) {
            double* r = w.slice(i, j) + (static_cast<std::size_t>(k) * m + c) * N;
            for (int l = 0; l < N; ++l) {
              double v = 0;
              for (int q = 0; q < 4; ++q)
                v += amp[q] * std::sin(freq[q] * ax.at(l) + ph[q] + kap[q] * (grid.s(i) + 0.1 * ax.at(k))) *
                     (1 + grid.s(j));
              r[l] = v;
            }
          }
  };
  detail::WindowStore a(jlo, J, B), b(jlo, J, B), Sa(jlo, J, B), Sb(jlo, J, B);
  random_field(1, a);
  random_field(2, b);
  K.apply(a, Sa);
  K.apply(b, Sb);
  auto to_field = [&](const detail::WindowStore& u, const detail::WindowStore& v) {
    ThetaField f(grid, m, p.xi_dependent, true);
    for (int j = jlo; j <= J; ++j)
      for (int i = 0; i <= j; ++i) {
        double* dst = f.values.data() + ThetaField::pair(i, j) * B;
        for (std::size_t q = 0; q < B; ++q) dst[q] = u.slice(i, j)[q] - v.slice(i, j)[q];
      }
    return f;
  };
  const double S = grid.s(jlo);
  const double num = xnorm(to_field(Sa, Sb), S).value;
  const double den = xnorm(to_field(a, b), S).value;
  return {grid.T - S, num / den};
}

}  // namespace bsvie
