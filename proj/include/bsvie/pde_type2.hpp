#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "detail/cn.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "model.hpp"
#include "pde_type1.hpp"
#include "picard.hpp"

namespace bsvie {

enum class GammaBackend { FD, Kernel };

// Gamma(t_i, s, x) solves the homogeneous backward equation on [0, t_i]
// with Gamma(t_i, t_i, x) = u(t_i, x). diag is laid out [i][c][l].
inline GammaField gamma_from_diagonal(const TriangleGrid& grid, int m, std::span<const double> diag, const SdeModel& M,
                                      GammaBackend backend) {
  const int J = grid.Ns, N = grid.Nx;
  const UniformAxis ax = grid.axis();
  if (diag.size() != static_cast<std::size_t>(J + 1) * m * N) fail(ErrorCode::GridMismatch, "diagonal has the wrong size");
  GammaField G(grid, m);
  auto urow = [&](int i, int c) { return diag.data() + (static_cast<std::size_t>(i) * m + c) * N; };
  for (int i = 0; i <= J; ++i)
    for (int c = 0; c < m; ++c) std::copy_n(urow(i, c), N, G.row(i, i, c));
  if (J == 0) return G;
  if (backend == GammaBackend::Kernel) {
    const KernelParams kp = kernel_params(M);
    std::vector<GaussianSmoother> sm;
    for (int gap = 0; gap <= J; ++gap) {
      const double dt = grid.s(gap);
      sm.emplace_back(ax, kp.b * dt, 2 * kp.a * dt);
    }
    parallel_for(static_cast<std::size_t>(J + 1), [&](std::size_t ii) {
      const int i = static_cast<int>(ii);
      for (int j = 0; j < i; ++j)
        for (int c = 0; c < m; ++c)
          sm[i - j].apply(std::span<const double>(urow(i, c), N), std::span<double>(G.row(i, j, c), N));
    });
    return G;
  }
  std::vector<detail::LevelOperator> ops(J + 1);
  for (int j = 0; j <= J; ++j) ops[j].build(M, grid.s(j), ax);
  std::vector<detail::ImplicitSolver> solvers(J);
  for (int j = 0; j < J; ++j) solvers[j].factor(ops[j], 0.5 * (grid.s(j + 1) - grid.s(j)), N);
  parallel_for(static_cast<std::size_t>(J + 1), [&](std::size_t ii) {
    const int i = static_cast<int>(ii);
    for (int c = 0; c < m; ++c)
      for (int j = i - 1; j >= 0; --j) {
        const double dt = grid.s(j + 1) - grid.s(j);
        double* out = G.row(i, j, c);
        ops[j + 1].apply_explicit(G.row(i, j + 1, c), 0.5 * dt, out, N);
        solvers[j].solve(out);
      }
  });
  return G;
}

inline GammaField gamma_from_function(const TriangleGrid& grid, const std::function<double(double, double)>& lambda,
                                      const SdeModel& M, GammaBackend backend) {
  std::vector<double> diag(static_cast<std::size_t>(grid.Ns + 1) * grid.Nx);
  const UniformAxis ax = grid.axis();
  for (int i = 0; i <= grid.Ns; ++i)
    for (int l = 0; l < grid.Nx; ++l) diag[static_cast<std::size_t>(i) * grid.Nx + l] = lambda(grid.s(i), ax.at(l));
  return gamma_from_diagonal(grid, 1, diag, M, backend);
}

struct IterationLog {
  int iteration = 0;
  double update = 0;  // sup-norm change of the diagonal Theta(s,s,x,x)
  double seconds = 0;
};

struct MildSolution {
  ThetaField theta;
  GammaField gamma;
  std::vector<IterationLog> log;
  bool converged = false;
};

struct Type2Options {
  double tol = 1e-6;
  int max_iter = 50;
  GammaBackend gamma_backend = GammaBackend::FD;
  bool picard_theta = false;
  FdOptions fd;
  PicardOptions picard;
  // Called before each Type-I solve with the outer iteration number.
  std::function<void(int)> on_iteration;
};

// zeta(i, j, k) = Gamma_x(s_j, t_i, xi_k) sigma(t_i, xi_k) for i <= j.
inline ZetaProvider make_zeta_provider(const GammaField& G, const SdeModel& M) {
  return [&G, &M](int i, int j, int k, std::span<double> out) {
    const UniformAxis ax = G.grid.axis();
    const double xi = ax.at(k);
    double sig[16];
    M.sigma(G.grid.s(i), std::span<const double>(&xi, 1), std::span<double>(sig, M.d));
    for (int c = 0; c < G.m; ++c) {
      const double gx = G.dx_node(j, i, k, c);
      for (int q = 0; q < M.d; ++q) out[c * M.d + q] = gx * sig[q];
    }
  };
}

// Outer Picard loop: Gamma from the current diagonal, then a Type-I solve
// with zeta supplied by Gamma, until the diagonal stops moving.
inline MildSolution solve_type2(const TypeIIProblem& p, const TriangleGrid& grid, const Type2Options& o = {}) {
  const int J = grid.Ns, N = grid.Nx, m = p.m;
  const UniformAxis ax = grid.axis();
  const bool xi_dep = p.xi_dependent || p.zeta_dependent;
  MildSolution sol;
  std::vector<double> u(static_cast<std::size_t>(J + 1) * m * N);
  for (int i = 0; i <= J; ++i)
    for (int l = 0; l < N; ++l) {
      double x = ax.at(l), out[64];
      p.psi(grid.s(i), std::span<const double>(&x, 1), std::span<const double>(&x, 1), std::span<double>(out, m));
      for (int c = 0; c < m; ++c) u[(static_cast<std::size_t>(i) * m + c) * N + l] = out[c];
    }
  for (int it = 1; it <= o.max_iter; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const GammaField G = gamma_from_diagonal(grid, m, u, p.model, o.gamma_backend);
    const ZetaProvider zeta = make_zeta_provider(G, p.model);
    if (o.on_iteration) o.on_iteration(it);
    sol.theta = ThetaField();
    sol.theta = o.picard_theta ? solve_type1_picard_impl(p, grid, o.picard, &zeta, xi_dep).field
                               : detail::march_type1(p, grid, o.fd, &zeta, xi_dep);
    double upd = 0;
    for (std::size_t q = 0; q < u.size(); ++q) upd = std::max(upd, std::abs(sol.theta.diag[q] - u[q]));
    u = sol.theta.diag;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    sol.log.push_back({it, upd, secs});
    if (upd < o.tol) {
      sol.converged = true;
      break;
    }
  }
  if (!sol.converged)
    fail(ErrorCode::MaxIterExceeded, "outer Type-II loop did not reach tol " + format_double(o.tol) + " in " +
                                         std::to_string(o.max_iter) + " iterations");
  sol.gamma = gamma_from_diagonal(grid, m, u, p.model, o.gamma_backend);
  return sol;
}

// sup |theta~ - S[theta~]| for the mild formulation on [0, T], theta~ = Theta - psi,
// with S the kernel map. Constant coefficients only.
inline double mild_residual(const MildSolution& sol, const TypeIIProblem& p) {
  const ThetaField& th = sol.theta;
  th.require_full("mild_residual");
  detail::check_picard_grid(p, th.grid);
  const KernelParams kp = kernel_params(p.model);
  const TriangleGrid& g = th.grid;
  const int J = g.Ns;
  const ZetaProvider zeta = make_zeta_provider(sol.gamma, p.model);
  detail::KernelMap K;
  K.p = &p;
  K.grid = g;
  K.nxi = th.n_xi;
  K.jlo = 0;
  K.jhi = J;
  K.zeta = &zeta;
  K.a = kp.a;
  K.b = kp.b;
  detail::fill_terminal_from_psi(p, g, th.n_xi, J, K.phi);
  K.prepare();
  const std::size_t B = K.blk();
  detail::WindowStore in(0, J, B), out(0, J, B);
  for (int j = 0; j <= J; ++j)
    for (int i = 0; i <= j; ++i) {
      const double* src = th.values.data() + ThetaField::pair(i, j) * B;
      const double* ph = K.phi.data() + i * B;
      double* dst = in.slice(i, j);
      for (std::size_t q = 0; q < B; ++q) dst[q] = src[q] - ph[q];
    }
  K.apply(in, out);
  return in.max_diff(out);
}

// ||theta||_Y on [S, T]: sup_t (int_{t v S}^T sup |theta_x|^p ds)^{1/p} + sup |theta|.
inline double window_norm_y(const ThetaField& th, double S, double p) {
  if (!(p > 1 && p < 2)) fail(ErrorCode::BadExponent, "exponent p must lie in (1, 2)");
  th.require_full("window_norm_y");
  const TriangleGrid& g = th.grid;
  const int N = g.Nx;
  int jS = 0;
  while (jS < g.Ns && g.s(jS) < S - 1e-12) ++jS;
  // sup over (xi, x) of |theta_x| per knot pair.
  double sup_all = 0, best = 0;
  for (int i = 0; i <= g.Ns; ++i) {
    const int j0 = std::max(i, jS);
    std::vector<double> q;
    for (int j = j0; j <= g.Ns; ++j) {
      double sx = 0;
      for (int k = 0; k < th.n_xi; ++k)
        for (int l = 0; l < N; ++l) {
          double a2 = 0, v2 = 0;
          for (int c = 0; c < th.m; ++c) {
            const double dx = diff_x(th.row_span(i, j, k, c), g.h(), l);
            a2 += dx * dx;
            v2 += th.at(i, j, k, l, c) * th.at(i, j, k, l, c);
          }
          sx = std::max(sx, std::sqrt(a2));
          sup_all = std::max(sup_all, std::sqrt(v2));
        }
      q.push_back(std::pow(sx, p));
    }
    double integral = 0;
    for (std::size_t u = 0; u + 1 < q.size(); ++u)
      integral += 0.5 * (q[u] + q[u + 1]) * (g.s(j0 + static_cast<int>(u) + 1) - g.s(j0 + static_cast<int>(u)));
    best = std::max(best, std::pow(integral, 1.0 / p));
  }
  return best + sup_all;
}

inline void write_mild_solution(const std::string& path, const MildSolution& sol, const std::string& problem_hash) {
  sol.theta.require_full("export");
  json h;
  h["kind"] = "mild_solution";
  h["grid"] = grid_json(sol.theta.grid);
  h["m"] = sol.theta.m;
  h["n_xi"] = sol.theta.n_xi;
  h["problem_hash"] = problem_hash;
  json log = json::array();
  for (const auto& e : sol.log) log.push_back({{"iteration", e.iteration}, {"update", e.update}, {"seconds", e.seconds}});
  h["iterations"] = log;
  const auto& g = sol.theta.grid;
  write_columnar(path, h,
                 {{"theta", {g.pairs(), static_cast<std::size_t>(sol.theta.n_xi), static_cast<std::size_t>(sol.theta.m),
                             static_cast<std::size_t>(g.Nx)},
                   sol.theta.values},
                  {"diagonal", {static_cast<std::size_t>(g.Ns + 1), static_cast<std::size_t>(sol.theta.m),
                                static_cast<std::size_t>(g.Nx)},
                   sol.theta.diag},
                  {"gamma", {g.pairs(), static_cast<std::size_t>(sol.gamma.m), static_cast<std::size_t>(g.Nx)},
                   sol.gamma.values}});
}

}  // namespace bsvie
