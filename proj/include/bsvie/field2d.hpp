#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "error.hpp"

namespace bsvie {

// Uniform 1-D grid x_l = lo + l*h, l = 0..N-1.
struct UniformAxis {
  double lo = 0, h = 1;
  int N = 0;
  double at(int l) const { return lo + h * l; }
  double hi() const { return lo + h * (N - 1); }
};

// Row value at a possibly out-of-range integer index; linear extrapolation
// outside, matching the zero-second-derivative boundary.
inline double extended_value(std::span<const double> row, long l) {
  const long N = static_cast<long>(row.size());
  if (l < 0) return row[0] + static_cast<double>(l) * (row[1] - row[0]);
  if (l >= N) return row[N - 1] + static_cast<double>(l - N + 1) * (row[N - 1] - row[N - 2]);
  return row[l];
}

inline double interp_linear(std::span<const double> row, const UniformAxis& ax, double x) {
  const double u = (x - ax.lo) / ax.h;
  long l = static_cast<long>(std::floor(u));
  l = std::clamp<long>(l, 0, ax.N - 2);
  const double w = u - static_cast<double>(l);
  return (1 - w) * row[l] + w * row[l + 1];
}

// Four-point Lagrange interpolation inside the grid, linear outside.
inline double interp_cubic(std::span<const double> row, const UniformAxis& ax, double x) {
  if (ax.N < 4) return interp_linear(row, ax, x);
  const double u = (x - ax.lo) / ax.h;
  if (u <= 0 || u >= ax.N - 1) {
    const long l = static_cast<long>(std::floor(u));
    const double w = u - static_cast<double>(l);
    return (1 - w) * extended_value(row, l) + w * extended_value(row, l + 1);
  }
  long l = static_cast<long>(std::floor(u));
  l = std::clamp<long>(l, 1, ax.N - 3);
  const double t = u - static_cast<double>(l);
  const double p0 = row[l - 1], p1 = row[l], p2 = row[l + 1], p3 = row[l + 2];
  const double w0 = -t * (t - 1) * (t - 2) / 6, w1 = (t + 1) * (t - 1) * (t - 2) / 2;
  const double w2 = -(t + 1) * t * (t - 2) / 2, w3 = (t + 1) * t * (t - 1) / 6;
  return w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3;
}

// Central difference in x, second-order one-sided at the ends.
inline double diff_x(std::span<const double> row, double h, int l) {
  const int N = static_cast<int>(row.size());
  if (l == 0) return (-3 * row[0] + 4 * row[1] - row[2]) / (2 * h);
  if (l == N - 1) return (3 * row[N - 1] - 4 * row[N - 2] + row[N - 3]) / (2 * h);
  return (row[l + 1] - row[l - 1]) / (2 * h);
}

inline double diff_xx(std::span<const double> row, double h, int l) {
  const int N = static_cast<int>(row.size());
  l = std::clamp(l, 1, N - 2);
  return (row[l + 1] - 2 * row[l] + row[l - 1]) / (h * h);
}

// Function on a (time knots) x (uniform x axis) grid with m components,
// stored as [j][c][l].
struct Field2D {
  std::vector<double> s;
  UniformAxis x;
  int m = 1;
  std::vector<double> v;

  Field2D() = default;
  Field2D(std::vector<double> knots, UniformAxis ax, int comps = 1)
      : s(std::move(knots)), x(ax), m(comps), v(s.size() * static_cast<std::size_t>(comps) * ax.N, 0.0) {}

  int Ns() const { return static_cast<int>(s.size()); }
  double& at(int j, int l, int c = 0) { return v[(static_cast<std::size_t>(j) * m + c) * x.N + l]; }
  double at(int j, int l, int c = 0) const { return v[(static_cast<std::size_t>(j) * m + c) * x.N + l]; }
  std::span<const double> row(int j, int c = 0) const {
    return {v.data() + (static_cast<std::size_t>(j) * m + c) * x.N, static_cast<std::size_t>(x.N)};
  }
  std::span<double> row(int j, int c = 0) {
    return {v.data() + (static_cast<std::size_t>(j) * m + c) * x.N, static_cast<std::size_t>(x.N)};
  }

  template <class F>
  static Field2D sample(std::vector<double> knots, UniformAxis ax, F f) {
    Field2D g(std::move(knots), ax, 1);
    for (int j = 0; j < g.Ns(); ++j)
      for (int l = 0; l < ax.N; ++l) g.at(j, l) = f(g.s[j], ax.at(l));
    return g;
  }

  // Nodes with |x| <= r.
  Field2D crop(double r) const {
    int l0 = 0;
    while (l0 < x.N && x.at(l0) < -r - 1e-12) ++l0;
    int l1 = x.N - 1;
    while (l1 > l0 && x.at(l1) > r + 1e-12) --l1;
    Field2D c(s, UniformAxis{x.at(l0), x.h, l1 - l0 + 1}, m);
    for (int j = 0; j < Ns(); ++j)
      for (int k = 0; k < m; ++k) std::copy_n(row(j, k).data() + l0, c.x.N, c.row(j, k).data());
    return c;
  }

  // Linear in time, cubic in space.
  double eval(double t, double xx, int c = 0) const {
    if (Ns() == 1) return interp_cubic(row(0, c), x, xx);
    auto it = std::upper_bound(s.begin(), s.end(), t);
    int j = static_cast<int>(it - s.begin()) - 1;
    j = std::clamp(j, 0, Ns() - 2);
    const double w = std::clamp((t - s[j]) / (s[j + 1] - s[j]), 0.0, 1.0);
    return (1 - w) * interp_cubic(row(j, c), x, xx) + w * interp_cubic(row(j + 1, c), x, xx);
  }
};

inline std::vector<double> uniform_knots(double lo, double hi, int steps) {
  std::vector<double> k(static_cast<std::size_t>(steps) + 1);
  for (int j = 0; j <= steps; ++j) k[j] = lo + (hi - lo) * j / steps;
  k.back() = hi;
  return k;
}

}  // namespace bsvie
