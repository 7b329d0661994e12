#pragma once

// Spatial operator L = a(s,x) d_xx + b(s,x) d_x on a uniform axis with the
// zero-second-derivative boundary, and the implicit solve (I - w L) v = r.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "../error.hpp"
#include "../field2d.hpp"
#include "../model.hpp"

namespace bsvie::detail {

struct LevelOperator {
  std::vector<double> lo, di, up;  // interior stencil of L
  std::vector<double> sigma;       // [l][q]
  int d = 1;

  void build(const SdeModel& M, double s, const UniformAxis& ax) {
    const int N = ax.N;
    d = M.d;
    lo.assign(N, 0.0);
    di.assign(N, 0.0);
    up.assign(N, 0.0);
    sigma.assign(static_cast<std::size_t>(N) * d, 0.0);
    const double h = ax.h;
    for (int l = 0; l < N; ++l) {
      const double x = ax.at(l);
      std::span<double> sg(sigma.data() + static_cast<std::size_t>(l) * d, d);
      M.sigma(s, std::span<const double>(&x, 1), sg);
      double a = 0;
      for (double v : sg) a += v * v;
      a *= 0.5;
      double b = 0;
      M.b(s, std::span<const double>(&x, 1), std::span<double>(&b, 1));
      if (!std::isfinite(a) || !std::isfinite(b))
        fail(ErrorCode::NonFiniteCoefficient, "coefficient not finite at s=" + std::to_string(s));
      if (std::abs(b) * h >= 2 * a && l > 0 && l < N - 1)
        fail(ErrorCode::TridiagonalSingular, "cell Peclet number >= 2; refine the x grid");
      lo[l] = a / (h * h) - b / (2 * h);
      di[l] = -2 * a / (h * h);
      up[l] = a / (h * h) + b / (2 * h);
    }
  }

  // out = v + w L v on interior nodes; boundary entries are left untouched.
  void apply_explicit(const double* v, double w, double* out, int N) const {
    for (int l = 1; l < N - 1; ++l) out[l] = v[l] + w * (lo[l] * v[l - 1] + di[l] * v[l] + up[l] * v[l + 1]);
  }
};

// Thomas factorization of (I - w L) on interior nodes with the boundary
// values eliminated through v_0 = 2 v_1 - v_2 and its mirror image.
class ImplicitSolver {
 public:
  void factor(const LevelOperator& op, double w, int N) {
    N_ = N;
    const int n = N - 2;
    sub_.assign(n, 0.0);
    cp_.assign(n, 0.0);
    inv_.assign(n, 0.0);
    std::vector<double> a(n), b(n), c(n);
    for (int r = 0; r < n; ++r) {
      const int l = r + 1;
      a[r] = -w * op.lo[l];
      b[r] = 1 - w * op.di[l];
      c[r] = -w * op.up[l];
    }
    b[0] += 2 * a[0];
    c[0] -= a[0];
    a[0] = 0;
    b[n - 1] += 2 * c[n - 1];
    a[n - 1] -= c[n - 1];
    c[n - 1] = 0;
    double denom = b[0];
    for (int r = 0; r < n; ++r) {
      if (r > 0) denom = b[r] - a[r] * cp_[r - 1];
      if (std::abs(denom) < 1e-14) fail(ErrorCode::TridiagonalSingular, "zero pivot in implicit step");
      inv_[r] = 1 / denom;
      cp_[r] = c[r] * inv_[r];
      sub_[r] = a[r];
    }
  }

  // rhs holds interior right-hand sides at 1..N-2; solution written in place,
  // boundary values extrapolated.
  void solve(double* v) const {
    const int n = N_ - 2;
    double* x = v + 1;
    x[0] = x[0] * inv_[0];
    for (int r = 1; r < n; ++r) x[r] = (x[r] - sub_[r] * x[r - 1]) * inv_[r];
    for (int r = n - 2; r >= 0; --r) x[r] -= cp_[r] * x[r + 1];
    v[0] = 2 * v[1] - v[2];
    v[N_ - 1] = 2 * v[N_ - 2] - v[N_ - 3];
  }

  // Several right-hand sides with the same matrix, interleaved in blocks
  // of eight so the recurrences overlap.
  void solve_many(double* const* rows, int count) const {
    int b = 0;
    for (; b + 8 <= count; b += 8) solve_block<8>(rows + b);
    for (; b < count; ++b) solve(rows[b]);
  }

 private:
  template <int B>
  void solve_block(double* const* rows) const {
    const int n = N_ - 2;
    double* x[B];
    for (int q = 0; q < B; ++q) x[q] = rows[q] + 1;
    for (int q = 0; q < B; ++q) x[q][0] *= inv_[0];
    for (int r = 1; r < n; ++r) {
      const double sb = sub_[r], iv = inv_[r];
      for (int q = 0; q < B; ++q) x[q][r] = (x[q][r] - sb * x[q][r - 1]) * iv;
    }
    for (int r = n - 2; r >= 0; --r) {
      const double cr = cp_[r];
      for (int q = 0; q < B; ++q) x[q][r] -= cr * x[q][r + 1];
    }
    for (int q = 0; q < B; ++q) {
      double* v = rows[q];
      v[0] = 2 * v[1] - v[2];
      v[N_ - 1] = 2 * v[N_ - 2] - v[N_ - 3];
    }
  }

  int N_ = 0;
  std::vector<double> sub_, cp_, inv_;
};

}  // namespace bsvie::detail
