#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "field2d.hpp"
#include "io.hpp"

namespace bsvie {

// Shared t/s knots on [0, T]; xi and x share the axis [-R, R].
struct TriangleGrid {
  double T = 1.0;
  int Ns = 200;
  double R = 8.0;
  int Nx = 401;
  double alpha = 0.5;

  static TriangleGrid make(double T, int Ns, double R, int Nx, double alpha = 0.5) {
    if (!(T >= 0) || !(R > 0) || Nx < 5) fail(ErrorCode::GridMismatch, "grid needs T >= 0, R > 0, Nx >= 5");
    if (T > 0 && Ns < 1) fail(ErrorCode::GridMismatch, "a single-knot grid cannot span T > 0");
    if (T == 0) Ns = 0;
    return TriangleGrid{T, Ns, R, Nx, alpha};
  }
  double ds() const { return Ns ? T / Ns : 0.0; }
  double h() const { return 2 * R / (Nx - 1); }
  UniformAxis axis() const { return {-R, h(), Nx}; }
  double s(int j) const { return j == Ns ? T : T * j / Ns; }
  std::vector<double> knots() const {
    std::vector<double> k(static_cast<std::size_t>(Ns) + 1);
    for (int j = 0; j <= Ns; ++j) k[j] = s(j);
    return k;
  }
  std::size_t pairs() const { return static_cast<std::size_t>(Ns + 1) * (Ns + 2) / 2; }
  double scheme_tolerance() const { return ds() * ds() + h() * h(); }
  // Knot index for time t, or -1 when t is not a knot.
  int knot_index(double t) const {
    if (Ns == 0) return std::abs(t) < 1e-12 ? 0 : -1;
    const double u = t / T * Ns;
    const long j = std::lround(u);
    return (j >= 0 && j <= Ns && std::abs(u - static_cast<double>(j)) < 1e-7) ? static_cast<int>(j) : -1;
  }
};

// Theta(t_i, s_j, xi_k, x_l) for i <= j, m components. The xi axis is
// collapsed to one entry for problems that do not depend on xi.
class ThetaField {
 public:
  TriangleGrid grid;
  int m = 1;
  int n_xi = 1;
  bool full = true;
  std::vector<double> values;  // [pair(i,j)][k][c][l]
  std::vector<double> diag;    // [j][c][l] = Theta(s_j, s_j, x_l, x_l)

  ThetaField() = default;
  ThetaField(const TriangleGrid& g, int comps, bool xi_dependent, bool store_full)
      : grid(g), m(comps), n_xi(xi_dependent ? g.Nx : 1), full(store_full) {
    if (full) values.assign(g.pairs() * row_block(), 0.0);
    diag.assign(static_cast<std::size_t>(g.Ns + 1) * m * g.Nx, 0.0);
  }

  static std::size_t pair(int i, int j) { return static_cast<std::size_t>(j) * (j + 1) / 2 + i; }
  std::size_t row_block() const { return static_cast<std::size_t>(n_xi) * m * grid.Nx; }
  bool xi_dependent() const { return n_xi > 1; }
  int xi_index(int k) const { return n_xi == 1 ? 0 : k; }

  double* row(int i, int j, int k, int c = 0) {
    return values.data() + pair(i, j) * row_block() + (static_cast<std::size_t>(xi_index(k)) * m + c) * grid.Nx;
  }
  const double* row(int i, int j, int k, int c = 0) const {
    return values.data() + pair(i, j) * row_block() + (static_cast<std::size_t>(xi_index(k)) * m + c) * grid.Nx;
  }
  std::span<const double> row_span(int i, int j, int k, int c = 0) const {
    return {row(i, j, k, c), static_cast<std::size_t>(grid.Nx)};
  }
  double at(int i, int j, int k, int l, int c = 0) const { return row(i, j, k, c)[l]; }
  double& at(int i, int j, int k, int l, int c = 0) { return row(i, j, k, c)[l]; }

  std::span<const double> diagonal(int j, int c = 0) const {
    return {diag.data() + (static_cast<std::size_t>(j) * m + c) * grid.Nx, static_cast<std::size_t>(grid.Nx)};
  }
  std::span<double> diagonal(int j, int c = 0) {
    return {diag.data() + (static_cast<std::size_t>(j) * m + c) * grid.Nx, static_cast<std::size_t>(grid.Nx)};
  }
  Field2D diagonal_field(int c = 0) const {
    Field2D f(grid.knots(), grid.axis(), 1);
    for (int j = 0; j <= grid.Ns; ++j) std::copy_n(diagonal(j, c).data(), grid.Nx, f.row(j).data());
    return f;
  }

  void require_full(const char* what) const {
    if (!full) fail(ErrorCode::GridMismatch, std::string(what) + " needs a fully stored field");
  }

  // Cell index and weight on the x axis; weights outside [0, 1] extrapolate.
  struct Loc {
    int l = 0;
    double w = 0;
  };
  static Loc loc(const UniformAxis& ax, double x) {
    const double u = (x - ax.lo) / ax.h;
    int l = static_cast<int>(std::floor(u));
    l = std::clamp(l, 0, ax.N - 2);
    return {l, u - l};
  }
  static std::pair<int, double> locate(const UniformAxis& ax, double x) {
    const Loc q = loc(ax, x);
    return {q.l, q.w};
  }

  // Bilinear in (xi, x) on the knot pair (i, j).
  double value(int i, int j, Loc xi, Loc x, int c = 0) const {
    auto rv = [&](int k) {
      const double* r = row(i, j, k, c);
      return (1 - x.w) * r[x.l] + x.w * r[x.l + 1];
    };
    if (n_xi == 1) return rv(0);
    return (1 - xi.w) * rv(xi.l) + xi.w * rv(xi.l + 1);
  }
  double value(int i, int j, double xi, double x, int c = 0) const {
    const UniformAxis ax = grid.axis();
    return value(i, j, loc(ax, xi), loc(ax, x), c);
  }

  // Bilinear interpolation of the nodal central differences in x.
  double dx(int i, int j, Loc xi, Loc x, int c = 0) const {
    const double h = grid.h();
    auto rowdx = [&](int k) {
      std::span<const double> r = row_span(i, j, k, c);
      return (1 - x.w) * diff_x(r, h, x.l) + x.w * diff_x(r, h, x.l + 1);
    };
    if (n_xi == 1) return rowdx(0);
    return (1 - xi.w) * rowdx(xi.l) + xi.w * rowdx(xi.l + 1);
  }
  double dx(int i, int j, double xi, double x, int c = 0) const {
    const UniformAxis ax = grid.axis();
    return dx(i, j, loc(ax, xi), loc(ax, x), c);
  }

  template <class F>  // F(t, s, xi, x, c) -> double
  static ThetaField from_function(const TriangleGrid& g, int comps, bool xi_dependent, F f) {
    ThetaField th(g, comps, xi_dependent, true);
    const UniformAxis ax = g.axis();
    for (int j = 0; j <= g.Ns; ++j)
      for (int i = 0; i <= j; ++i)
        for (int k = 0; k < th.n_xi; ++k)
          for (int c = 0; c < comps; ++c) {
            double* r = th.row(i, j, k, c);
            for (int l = 0; l < g.Nx; ++l) r[l] = f(g.s(i), g.s(j), ax.at(k), ax.at(l), c);
          }
    th.fill_diagonal_from_values();
    return th;
  }

  void fill_diagonal_from_values() {
    for (int j = 0; j <= grid.Ns; ++j)
      for (int c = 0; c < m; ++c)
        for (int l = 0; l < grid.Nx; ++l) diagonal(j, c)[l] = at(j, j, n_xi == 1 ? 0 : l, l, c);
  }
};

// Gamma(t_i, s_j, x_l) for j <= i.
class GammaField {
 public:
  TriangleGrid grid;
  int m = 1;
  std::vector<double> values;  // [lpair(i,j)][c][l]

  GammaField() = default;
  GammaField(const TriangleGrid& g, int comps) : grid(g), m(comps), values(g.pairs() * comps * g.Nx, 0.0) {}

  static std::size_t lpair(int i, int j) { return static_cast<std::size_t>(i) * (i + 1) / 2 + j; }
  double* row(int i, int j, int c = 0) {
    return values.data() + (lpair(i, j) * m + c) * static_cast<std::size_t>(grid.Nx);
  }
  const double* row(int i, int j, int c = 0) const {
    return values.data() + (lpair(i, j) * m + c) * static_cast<std::size_t>(grid.Nx);
  }
  std::span<const double> row_span(int i, int j, int c = 0) const {
    return {row(i, j, c), static_cast<std::size_t>(grid.Nx)};
  }
  double value(int i, int j, ThetaField::Loc x, int c = 0) const {
    const double* r = row(i, j, c);
    return (1 - x.w) * r[x.l] + x.w * r[x.l + 1];
  }
  double value(int i, int j, double x, int c = 0) const { return value(i, j, ThetaField::loc(grid.axis(), x), c); }
  double dx_node(int i, int j, int l, int c = 0) const { return diff_x(row_span(i, j, c), grid.h(), l); }
  double dx(int i, int j, ThetaField::Loc x, int c = 0) const {
    auto r = row_span(i, j, c);
    return (1 - x.w) * diff_x(r, grid.h(), x.l) + x.w * diff_x(r, grid.h(), x.l + 1);
  }
  double dx(int i, int j, double x, int c = 0) const { return dx(i, j, ThetaField::loc(grid.axis(), x), c); }
};

inline json grid_json(const TriangleGrid& g) {
  return {{"T", g.T}, {"Ns", g.Ns}, {"R", g.R}, {"Nx", g.Nx}, {"alpha", g.alpha}};
}

inline TriangleGrid grid_from_json(const json& j) {
  return TriangleGrid::make(j.at("T"), j.at("Ns"), j.at("R"), j.at("Nx"), j.at("alpha"));
}

inline void write_theta(const std::string& path, const ThetaField& th, const std::string& problem_hash) {
  th.require_full("export");
  json h;
  h["kind"] = "theta_field";
  h["grid"] = grid_json(th.grid);
  h["m"] = th.m;
  h["n_xi"] = th.n_xi;
  h["problem_hash"] = problem_hash;
  h["layout"] = "pair(i,j)=j(j+1)/2+i, then [xi][component][x]";
  write_columnar(path, h,
                 {{"values", {th.grid.pairs(), static_cast<std::size_t>(th.n_xi), static_cast<std::size_t>(th.m),
                              static_cast<std::size_t>(th.grid.Nx)},
                   th.values},
                  {"diagonal", {static_cast<std::size_t>(th.grid.Ns + 1), static_cast<std::size_t>(th.m),
                                static_cast<std::size_t>(th.grid.Nx)},
                   th.diag}});
}

inline ThetaField read_theta(const std::string& path) {
  ColumnarFile f = read_columnar(path);
  if (f.header.value("kind", "") != "theta_field") fail(ErrorCode::IoError, "'" + path + "' is not a theta field");
  ThetaField th(grid_from_json(f.header.at("grid")), f.header.at("m"), f.header.at("n_xi").get<int>() > 1, true);
  th.values = std::move(f.columns.at("values"));
  th.diag = std::move(f.columns.at("diagonal"));
  return th;
}

inline void write_diagonal_csv(const std::string& path, const ThetaField& th, const std::string& hash) {
  CsvWriter w(path, hash, {"s", "x", "component", "theta_diag"});
  const UniformAxis ax = th.grid.axis();
  for (int j = 0; j <= th.grid.Ns; ++j)
    for (int c = 0; c < th.m; ++c)
      for (int l = 0; l < th.grid.Nx; ++l) w.row(th.grid.s(j), ax.at(l), c, th.diagonal(j, c)[l]);
}

}  // namespace bsvie
