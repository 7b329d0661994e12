#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "detail/cn.hpp"
#include "error.hpp"
#include "field2d.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "util.hpp"

namespace bsvie {

struct HolderReport {
  double alpha = 0.5, S = 0, T = 0;
  double sup = 0, sup_x = 0, sup_xx = 0, sup_s = 0;
  double time_semi = 0;       // <phi>_s^(alpha/2)
  double space_semi = 0;      // <phi>_x^(alpha)
  double time_semi_1a = 0;    // <phi>_s^((1+alpha)/2)
  double dx_time_semi = 0;    // <phi_x>_s^(alpha/2)
  double dx_space_semi = 0;   // <phi_x>_x^(alpha)
  double dx_time_semi_1a = 0; // <phi_x>_s^((1+alpha)/2)
  double ds_semi = 0;         // <phi_s>^(alpha)
  double dxx_semi = 0;        // <phi_xx>^(alpha)
  double holder_alpha = 0;    // |phi|^(alpha)
  double holder_1 = 0;        // |phi|^(1)
  double holder_1_alpha = 0;  // |phi|^(1+alpha)
  double holder_2 = 0;        // |phi|^(2)
  double holder_2_alpha = 0;  // |phi|^(2+alpha)
  double min_pair_distance = 0;
};

namespace detail {

// Values on selected knots: [j][c][l].
struct Slab {
  std::vector<double> s;
  UniformAxis x;
  int m = 1;
  std::vector<double> v;
  double at(int j, int l, int c) const { return v[(static_cast<std::size_t>(j) * m + c) * x.N + l]; }
  double& at(int j, int l, int c) { return v[(static_cast<std::size_t>(j) * m + c) * x.N + l]; }
  int Ns() const { return static_cast<int>(s.size()); }
  Slab like() const { return Slab{s, x, m, std::vector<double>(v.size(), 0.0)}; }
};

inline double vec_dist(const Slab& f, int j1, int l1, int j2, int l2) {
  double acc = 0;
  for (int c = 0; c < f.m; ++c) {
    const double d = f.at(j1, l1, c) - f.at(j2, l2, c);
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline double slab_sup(const Slab& f) {
  double r = 0;
  for (int j = 0; j < f.Ns(); ++j)
    for (int l = 0; l < f.x.N; ++l) {
      double acc = 0;
      for (int c = 0; c < f.m; ++c) acc += f.at(j, l, c) * f.at(j, l, c);
      r = std::max(r, std::sqrt(acc));
    }
  return r;
}

inline double time_semi(const Slab& f, double expo) {
  double r = 0;
  for (int l = 0; l < f.x.N; ++l)
    for (int a = 0; a < f.Ns(); ++a)
      for (int b = a + 1; b < f.Ns(); ++b)
        r = std::max(r, vec_dist(f, a, l, b, l) / std::pow(f.s[b] - f.s[a], expo));
  return r;
}

inline double space_semi(const Slab& f, double expo) {
  double r = 0;
  const int reach = static_cast<int>(std::floor(1.0 / f.x.h + 1e-9));
  for (int j = 0; j < f.Ns(); ++j)
    for (int l = 0; l < f.x.N; ++l)
      for (int k = 1; k <= reach && l + k < f.x.N; ++k)
        r = std::max(r, vec_dist(f, j, l, j, l + k) / std::pow(k * f.x.h, expo));
  return r;
}

inline Slab slab_dx(const Slab& f) {
  Slab g = f.like();
  for (int j = 0; j < f.Ns(); ++j)
    for (int c = 0; c < f.m; ++c) {
      std::span<const double> r(f.v.data() + (static_cast<std::size_t>(j) * f.m + c) * f.x.N, f.x.N);
      for (int l = 0; l < f.x.N; ++l) g.at(j, l, c) = diff_x(r, f.x.h, l);
    }
  return g;
}

inline Slab slab_dxx(const Slab& f) {
  Slab g = f.like();
  for (int j = 0; j < f.Ns(); ++j)
    for (int c = 0; c < f.m; ++c) {
      std::span<const double> r(f.v.data() + (static_cast<std::size_t>(j) * f.m + c) * f.x.N, f.x.N);
      for (int l = 0; l < f.x.N; ++l) g.at(j, l, c) = diff_xx(r, f.x.h, l);
    }
  return g;
}

inline Slab slab_ds(const Slab& f) {
  Slab g = f.like();
  const int n = f.Ns();
  if (n < 2) return g;
  for (int j = 0; j < n; ++j) {
    const int a = j == 0 ? 0 : j - 1, b = j == n - 1 ? n - 1 : j + 1;
    for (int c = 0; c < f.m; ++c)
      for (int l = 0; l < f.x.N; ++l) g.at(j, l, c) = (f.at(b, l, c) - f.at(a, l, c)) / (f.s[b] - f.s[a]);
  }
  return g;
}

inline HolderReport holder_of_slab(const Slab& f, double alpha) {
  HolderReport r;
  r.alpha = alpha;
  r.S = f.s.front();
  r.T = f.s.back();
  r.min_pair_distance = f.x.h;
  const Slab fx = slab_dx(f), fxx = slab_dxx(f), fs = slab_ds(f);
  r.sup = slab_sup(f);
  r.sup_x = slab_sup(fx);
  r.sup_xx = slab_sup(fxx);
  r.sup_s = slab_sup(fs);
  r.time_semi = time_semi(f, alpha / 2);
  r.space_semi = space_semi(f, alpha);
  r.time_semi_1a = time_semi(f, (1 + alpha) / 2);
  r.dx_time_semi = time_semi(fx, alpha / 2);
  r.dx_space_semi = space_semi(fx, alpha);
  r.dx_time_semi_1a = time_semi(fx, (1 + alpha) / 2);
  r.ds_semi = time_semi(fs, alpha / 2) + space_semi(fs, alpha);
  r.dxx_semi = time_semi(fxx, alpha / 2) + space_semi(fxx, alpha);
  r.holder_alpha = r.sup + r.time_semi + r.space_semi;
  r.holder_1 = r.sup + r.sup_x;
  r.holder_1_alpha = r.holder_1 + (r.dx_time_semi + r.dx_space_semi) + r.time_semi_1a;
  r.holder_2 = r.holder_1 + r.sup_s + r.sup_xx;
  r.holder_2_alpha = r.holder_2 + r.ds_semi + r.dxx_semi + r.dx_time_semi_1a;
  return r;
}

}  // namespace detail

// Holder norms of phi restricted to the knots inside [S, T].
inline HolderReport holder_report(const Field2D& phi, double alpha, double S, double T) {
  const double eps = 1e-12 * std::max(1.0, std::abs(phi.s.back()));
  if (phi.s.empty() || S < phi.s.front() - eps || T > phi.s.back() + eps || !(S < T))
    fail(ErrorCode::WindowOutsideGrid, "window [" + format_double(S) + ", " + format_double(T) + "] outside the grid");
  detail::Slab f;
  f.x = phi.x;
  f.m = phi.m;
  for (int j = 0; j < phi.Ns(); ++j) {
    if (phi.s[j] < S - eps || phi.s[j] > T + eps) continue;
    f.s.push_back(phi.s[j]);
    for (int c = 0; c < phi.m; ++c) {
      auto r = phi.row(j, c);
      f.v.insert(f.v.end(), r.begin(), r.end());
    }
  }
  if (f.Ns() < 2) fail(ErrorCode::WindowOutsideGrid, "window holds fewer than two knots");
  return detail::holder_of_slab(f, alpha);
}

struct XNormReport {
  double value = 0;
  double t = 0, xi = 0;  // maximizing slice
  double sup = 0, sup_x = 0, dx_holder = 0, time_semi_1a = 0;
  double sup_t = 0, sup_xi = 0, sup_xt = 0, sup_xxi = 0;
};

// sup over (t, xi) of |theta|^(1+alpha) on [t v S, T] plus the sup norms of
// theta_t, theta_xi, theta_xt, theta_xxi; components reported at the maximizer.
inline XNormReport xnorm(const ThetaField& th, double S) {
  th.require_full("xnorm");
  const TriangleGrid& g = th.grid;
  if (S < -1e-12 || S > g.T) fail(ErrorCode::WindowOutsideGrid, "S outside [0, T]");
  const UniformAxis ax = g.axis();
  const int N = g.Nx, m = th.m;
  int jS = 0;
  while (jS < g.Ns && g.s(jS) < S - 1e-12) ++jS;
  XNormReport best;
  best.value = -1;
  for (int i = 0; i <= g.Ns; ++i) {
    const int j0 = std::max(i, jS);
    if (g.Ns - j0 < 1) continue;
    for (int k = 0; k < th.n_xi; ++k) {
      detail::Slab f;
      f.x = ax;
      f.m = m;
      for (int j = j0; j <= g.Ns; ++j) {
        f.s.push_back(g.s(j));
        for (int c = 0; c < m; ++c) f.v.insert(f.v.end(), th.row(i, j, k, c), th.row(i, j, k, c) + N);
      }
      const detail::Slab fx = detail::slab_dx(f);
      XNormReport r;
      r.t = g.s(i);
      r.xi = th.n_xi == 1 ? 0.0 : ax.at(k);
      r.sup = detail::slab_sup(f);
      r.sup_x = detail::slab_sup(fx);
      r.dx_holder = detail::time_semi(fx, g.alpha / 2) + detail::space_semi(fx, g.alpha);
      r.time_semi_1a = detail::time_semi(f, (1 + g.alpha) / 2);
      // Cross-slice derivatives on the common s-range.
      const int ia = i > 0 ? i - 1 : i, ib = i < g.Ns ? i + 1 : i;
      const int ka = th.n_xi > 1 && k > 0 ? k - 1 : k, kb = th.n_xi > 1 && k < th.n_xi - 1 ? k + 1 : k;
      for (int j = std::max(j0, ib); j <= g.Ns; ++j)
        for (int c = 0; c < m; ++c) {
          auto ra = th.row_span(ia, j, k, c), rb = th.row_span(ib, j, k, c);
          auto qa = th.row_span(i, j, ka, c), qb = th.row_span(i, j, kb, c);
          for (int l = 0; l < N; ++l) {
            if (ib != ia) {
              const double dtt = g.s(ib) - g.s(ia);
              r.sup_t = std::max(r.sup_t, std::abs(rb[l] - ra[l]) / dtt);
              r.sup_xt = std::max(r.sup_xt, std::abs(diff_x(rb, ax.h, l) - diff_x(ra, ax.h, l)) / dtt);
            }
            if (kb != ka) {
              const double dxi = ax.h * (kb - ka);
              r.sup_xi = std::max(r.sup_xi, std::abs(qb[l] - qa[l]) / dxi);
              r.sup_xxi = std::max(r.sup_xxi, std::abs(diff_x(qb, ax.h, l) - diff_x(qa, ax.h, l)) / dxi);
            }
          }
        }
      r.value = r.sup + r.sup_x + r.dx_holder + r.time_semi_1a + r.sup_t + r.sup_xi + r.sup_xt + r.sup_xxi;
      if (r.value > best.value) best = r;
    }
  }
  if (best.value < 0) best.value = 0;
  return best;
}

struct ProbeRow {
  double window = 0;
  double sup = 0, sup_x = 0, holder_1_alpha = 0;
};

struct ProbeReport {
  std::vector<ProbeRow> rows;
  double slope_sup = 0, slope_sup_x = 0, slope_holder = 0;
  double expo_sup = 1, expo_sup_x = 0, expo_holder = 0;
  bool pass = false;
};

struct ProbeOptions {
  double T = 1.0;
  double alpha = 0.5;
  int steps_per_window = 64;
  double R = 8.0;
  int Nx = 321;
  double measure_R = 4.0;  // norms are taken on |x| <= measure_R
};

// Solves v_s + a v_xx + b v_x + f = 0, v(T) = 0 on windows [T - w, T] and
// fits log-log slopes of |v|^(0), |v_x|^(0), |v|^(1+alpha) against w. The
// truncation boundary is excluded from the norms.
inline ProbeReport window_scaling_probe(const KernelParams& kp, const std::function<double(double, double)>& f,
                                        const std::vector<double>& windows, const ProbeOptions& o = {}) {
  ProbeReport rep;
  rep.expo_sup = 1.0;
  rep.expo_sup_x = (1 + o.alpha) / 2;
  rep.expo_holder = o.alpha / 2;
  const SdeModel M = make_model(1, 1, {Expr::constant(kp.b)}, {Expr::constant(std::sqrt(2 * kp.a))}, 1, 0, 1e300);
  const UniformAxis ax{-o.R, 2 * o.R / (o.Nx - 1), o.Nx};
  for (double w : windows) {
    const double S = o.T - w;
    Field2D v(uniform_knots(S, o.T, o.steps_per_window), ax, 1);
    detail::LevelOperator op1, op0;
    detail::ImplicitSolver solver;
    op1.build(M, o.T, ax);
    std::vector<double> e(ax.N), f1(ax.N), f0(ax.N);
    for (int j = o.steps_per_window - 1; j >= 0; --j) {
      const double s0 = v.s[j], s1 = v.s[j + 1], dt = s1 - s0;
      op0.build(M, s0, ax);
      solver.factor(op0, 0.5 * dt, ax.N);
      auto nxt = v.row(j + 1);
      op1.apply_explicit(nxt.data(), 0.5 * dt, e.data(), ax.N);
      auto out = v.row(j);
      for (int l = 1; l < ax.N - 1; ++l) out[l] = e[l] + 0.5 * dt * (f(s1, ax.at(l)) + f(s0, ax.at(l)));
      solver.solve(out.data());
      std::swap(op0, op1);
    }
    const HolderReport h = holder_report(v.crop(o.measure_R), o.alpha, S, o.T);
    rep.rows.push_back({w, h.sup, h.sup_x, h.holder_1_alpha});
  }
  std::vector<double> W, a, b, c;
  for (const auto& r : rep.rows) {
    W.push_back(r.window);
    a.push_back(r.sup);
    b.push_back(std::max(r.sup_x, 1e-300));
    c.push_back(r.holder_1_alpha);
  }
  rep.slope_sup = loglog_slope(W, a);
  rep.slope_sup_x = loglog_slope(W, b);
  rep.slope_holder = loglog_slope(W, c);
  rep.pass = rep.slope_sup >= rep.expo_sup - 1e-9 && rep.slope_holder >= rep.expo_holder - 1e-9;
  return rep;
}

}  // namespace bsvie
