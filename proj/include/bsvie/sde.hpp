#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "model.hpp"
#include "util.hpp"

namespace bsvie {

struct TimeGrid {
  std::vector<double> knots;

  static TimeGrid uniform(double T, int steps) {
    if (steps < 1) fail(ErrorCode::GridMismatch, "time grid needs at least one step");
    TimeGrid g;
    g.knots.resize(static_cast<std::size_t>(steps) + 1);
    for (int j = 0; j <= steps; ++j) g.knots[j] = T * j / steps;
    g.knots.back() = T;
    return g;
  }
  int steps() const { return static_cast<int>(knots.size()) - 1; }
  double T() const { return knots.back(); }
  double dt(int j) const { return knots[j + 1] - knots[j]; }
};

struct PathEnsemble {
  TimeGrid grid;
  int n_paths = 0, n = 1, d = 1;
  std::uint64_t seed = 0;
  bool antithetic = false;
  std::vector<double> x0;
  std::vector<double> X;   // [path][time][n]
  std::vector<double> dW;  // [path][time-1][d]

  int n_times() const { return static_cast<int>(grid.knots.size()); }
  double& x(int p, int j, int i = 0) { return X[(static_cast<std::size_t>(p) * n_times() + j) * n + i]; }
  double x(int p, int j, int i = 0) const { return X[(static_cast<std::size_t>(p) * n_times() + j) * n + i]; }
  double& dw(int p, int j, int q = 0) { return dW[(static_cast<std::size_t>(p) * (n_times() - 1) + j) * d + q]; }
  double dw(int p, int j, int q = 0) const {
    return dW[(static_cast<std::size_t>(p) * (n_times() - 1) + j) * d + q];
  }
};

struct SimulateOptions {
  bool antithetic = false;
};

namespace detail {

inline void euler_path(const SdeModel& M, PathEnsemble& e, int p) {
  const int n = M.n, d = M.d, J = e.grid.steps();
  std::vector<double> b(n), sig(static_cast<std::size_t>(n) * d), x(n);
  for (int i = 0; i < n; ++i) x[i] = e.x(p, 0, i) = e.x0[i];
  for (int j = 0; j < J; ++j) {
    const double s = e.grid.knots[j], dt = e.grid.dt(j);
    M.b(s, x, b);
    M.sigma(s, x, sig);
    for (int i = 0; i < n; ++i) {
      double acc = x[i] + b[i] * dt;
      for (int q = 0; q < d; ++q) acc += sig[i * d + q] * e.dw(p, j, q);
      if (!std::isfinite(acc))
        fail(ErrorCode::NonFiniteState, "path " + std::to_string(p) + " at step " + std::to_string(j));
      x[i] = acc;
    }
    for (int i = 0; i < n; ++i) e.x(p, j + 1, i) = x[i];
  }
}

}  // namespace detail

// Euler-Maruyama. Increments for (path, step, component) come from a
// counter-based generator, so results do not depend on evaluation order.
inline PathEnsemble simulate(const SdeModel& M, std::span<const double> x0, const TimeGrid& grid, int n_paths,
                             std::uint64_t seed, const SimulateOptions& opt = {}) {
  if (static_cast<int>(x0.size()) != M.n) fail(ErrorCode::GridMismatch, "x0 has wrong dimension");
  PathEnsemble e;
  e.grid = grid;
  e.n_paths = n_paths;
  e.n = M.n;
  e.d = M.d;
  e.seed = seed;
  e.antithetic = opt.antithetic;
  e.x0.assign(x0.begin(), x0.end());
  const int J = grid.steps();
  e.X.resize(static_cast<std::size_t>(n_paths) * (J + 1) * M.n);
  e.dW.resize(static_cast<std::size_t>(n_paths) * J * M.d);
  parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t pi) {
    const int p = static_cast<int>(pi);
    const std::uint64_t key = opt.antithetic ? static_cast<std::uint64_t>(p / 2) : static_cast<std::uint64_t>(p);
    const double sign = (opt.antithetic && (p % 2)) ? -1.0 : 1.0;
    for (int j = 0; j < J; ++j) {
      const double sq = std::sqrt(grid.dt(j));
      for (int q = 0; q < M.d; ++q) e.dw(p, j, q) = sign * sq * counter_normal(seed, key, static_cast<std::uint64_t>(j), q);
    }
    detail::euler_path(M, e, p);
  });
  return e;
}

// Re-runs the Euler scheme on a grid coarsened by `factor`, summing the
// fine increments so that coarse and fine paths share one Brownian path.
inline PathEnsemble coarsen(const PathEnsemble& fine, const SdeModel& M, int factor) {
  const int J = fine.grid.steps();
  if (factor < 1 || J % factor != 0) fail(ErrorCode::GridMismatch, "coarsening factor must divide the step count");
  PathEnsemble e;
  e.grid.knots.clear();
  for (int j = 0; j <= J; j += factor) e.grid.knots.push_back(fine.grid.knots[j]);
  e.n_paths = fine.n_paths;
  e.n = fine.n;
  e.d = fine.d;
  e.seed = fine.seed;
  e.antithetic = fine.antithetic;
  e.x0 = fine.x0;
  const int Jc = J / factor;
  e.X.resize(static_cast<std::size_t>(e.n_paths) * (Jc + 1) * e.n);
  e.dW.assign(static_cast<std::size_t>(e.n_paths) * Jc * e.d, 0.0);
  parallel_for(static_cast<std::size_t>(e.n_paths), [&](std::size_t pi) {
    const int p = static_cast<int>(pi);
    for (int j = 0; j < Jc; ++j)
      for (int k = 0; k < factor; ++k)
        for (int q = 0; q < e.d; ++q) e.dw(p, j, q) += fine.dw(p, j * factor + k, q);
    detail::euler_path(M, e, p);
  });
  return e;
}

// K0 = max over knot pairs of E|X(s)-X(t)|^2 / |s-t|, on at most 65 knots.
inline double increment_bound(const PathEnsemble& e) {
  const int J = e.grid.steps();
  const int stride = std::max(1, (J + 63) / 64);
  std::vector<int> idx;
  for (int j = 0; j <= J; j += stride) idx.push_back(j);
  double best = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      double acc = 0.0;
      for (int p = 0; p < e.n_paths; ++p)
        for (int i = 0; i < e.n; ++i) {
          const double dx = e.x(p, idx[b], i) - e.x(p, idx[a], i);
          acc += dx * dx;
        }
      const double q = acc / e.n_paths / (e.grid.knots[idx[b]] - e.grid.knots[idx[a]]);
      best = std::max(best, q);
    }
  return best;
}

inline void write_ensemble(const std::string& path, const PathEnsemble& e) {
  json h;
  h["kind"] = "path_ensemble";
  h["n_paths"] = e.n_paths;
  h["n"] = e.n;
  h["d"] = e.d;
  h["seed"] = e.seed;
  h["antithetic"] = e.antithetic;
  h["x0"] = e.x0;
  h["knots"] = e.grid.knots;
  const std::size_t P = e.n_paths, Tn = e.grid.knots.size();
  write_columnar(path, h,
                 {{"X", {P, Tn, static_cast<std::size_t>(e.n)}, e.X},
                  {"dW", {P, Tn - 1, static_cast<std::size_t>(e.d)}, e.dW}});
}

inline PathEnsemble read_ensemble(const std::string& path) {
  ColumnarFile f = read_columnar(path);
  if (f.header.value("kind", "") != "path_ensemble") fail(ErrorCode::IoError, "'" + path + "' is not a path ensemble");
  PathEnsemble e;
  e.n_paths = f.header.at("n_paths");
  e.n = f.header.at("n");
  e.d = f.header.at("d");
  e.seed = f.header.at("seed");
  e.antithetic = f.header.at("antithetic");
  e.x0 = f.header.at("x0").get<std::vector<double>>();
  e.grid.knots = f.header.at("knots").get<std::vector<double>>();
  e.X = std::move(f.columns.at("X"));
  e.dW = std::move(f.columns.at("dW"));
  return e;
}

}  // namespace bsvie
