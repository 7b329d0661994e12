#include <gtest/gtest.h>

#include <cmath>

#include "bsvie/catalog.hpp"
#include "bsvie/pde_type1.hpp"

using namespace bsvie;

namespace {

TypeIProblem problem(const std::string& name) { return std::get<TypeIProblem>(find_catalog(name)->problem); }

double interior_error(const ThetaField& th, const ClosedForm& exact, double r) {
  const TriangleGrid& g = th.grid;
  const UniformAxis ax = g.axis();
  double e = 0;
  for (int j = 0; j <= g.Ns; ++j)
    for (int i = 0; i <= j; ++i)
      for (int k = 0; k < th.n_xi; ++k)
        for (int l = 0; l < g.Nx; ++l) {
          if (std::abs(ax.at(l)) > r) continue;
          const double xi = th.n_xi == 1 ? 0.0 : ax.at(k);
          e = std::max(e, std::abs(th.at(i, j, k, l) - exact(g.s(i), g.s(j), xi, ax.at(l))));
        }
  return e;
}

}  // namespace

TEST(Type1Fd, PolynomialSolutionsAreExact) {
  const TriangleGrid g = TriangleGrid::make(1.0, 10, 4.0, 41);
  for (const char* name : {"heat-terminal-x", "constant-generator", "t-linear-generator"}) {
    const auto e = *find_catalog(name);
    EXPECT_LT(interior_error(solve_type1_fd(problem(name), g), e.closed_form, 4.0), 1e-12) << name;
  }
}

TEST(Type1Fd, HeatSineConvergesAtSecondOrder) {
  const auto e = *find_catalog("heat-terminal-sin");
  const double e1 = interior_error(solve_type1_fd(problem(e.name), TriangleGrid::make(1.0, 10, 8.0, 81)), e.closed_form, 4);
  const double e2 = interior_error(solve_type1_fd(problem(e.name), TriangleGrid::make(1.0, 20, 8.0, 161)), e.closed_form, 4);
  EXPECT_LT(e2, 2e-3);
  EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.3);
}

TEST(Type1Fd, DiagonalFeedbackConvergesAtSecondOrder) {
  const auto e = *find_catalog("diagonal-exponential");
  const double e1 = interior_error(solve_type1_fd(problem(e.name), TriangleGrid::make(1.0, 16, 4.0, 21)), e.closed_form, 4);
  const double e2 = interior_error(solve_type1_fd(problem(e.name), TriangleGrid::make(1.0, 32, 4.0, 21)), e.closed_form, 4);
  EXPECT_LT(e2, 3e-4);
  EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.35);
}

TEST(Type1Fd, ResidualOfKnownFields) {
  // g = 0: x^2 + (T - s) solves the heat equation, and central differences are exact on quadratics.
  const TypeIProblem p = problem("heat-terminal-x");
  const TriangleGrid g = TriangleGrid::make(1.0, 6, 3.0, 13);
  const ThetaField good = ThetaField::from_function(g, 1, false, [](double, double s, double, double x, int) { return x * x + 1 - s; });
  EXPECT_LT(max_abs(pde_residual(good, p)), 1e-12);
  const ThetaField bad = ThetaField::from_function(g, 1, false, [](double, double, double, double x, int) { return x * x; });
  EXPECT_NEAR(max_abs(pde_residual(bad, p)), 1.0, 1e-12);
}

TEST(Type1Fd, StreamingMatchesStoredSolve) {
  const TypeIProblem p = problem("nonlinear-t");
  const TriangleGrid g = TriangleGrid::make(1.0, 12, 4.0, 33);
  const ThetaField full = solve_type1_fd(p, g);
  FdOptions o;
  o.store_full = false;
  int levels = 0;
  double worst = 0;
  o.observer = [&](const LevelView& v) {
    ++levels;
    for (int i = 0; i <= v.j; ++i)
      for (int k = 0; k < v.n_xi; k += 5) {
        const auto r = v.row(i, k);
        for (int l = 0; l < g.Nx; ++l) worst = std::max(worst, std::abs(r[l] - full.at(i, v.j, k, l)));
      }
  };
  const ThetaField s = solve_type1_fd(p, g, o);
  EXPECT_EQ(levels, g.Ns + 1);
  EXPECT_EQ(worst, 0.0);
  EXPECT_EQ(s.diag, full.diag);
  EXPECT_TRUE(s.values.empty());
}

TEST(Type1Fd, MemoryCapIsEnforced) {
  FdOptions o;
  o.max_field_doubles = 1000;
  try {
    solve_type1_fd(problem("nonlinear-t"), TriangleGrid::make(1.0, 20, 4.0, 41), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ResourceLimit);
  }
}

TEST(FeynmanKac, HeatEquation) {
  const TriangleGrid g = TriangleGrid::make(1.0, 20, 8.0, 161);
  const Field2D u = solve_feynman_kac_fd(detail::brownian_model(), [](double x) { return std::sin(x); },
                                         [](double, double, double, double) { return 0.0; }, g);
  const UniformAxis ax = g.axis();
  double e = 0;
  for (int j = 0; j <= g.Ns; ++j)
    for (int l = 40; l <= 120; ++l) e = std::max(e, std::abs(u.at(j, l) - std::exp(-0.5 * (1 - g.s(j))) * std::sin(ax.at(l))));
  EXPECT_LT(e, 2e-3);
}

TEST(FeynmanKac, BsdeDiagonalAgreesToSecondOrder) {
  // Without t or xi in the data, the Type-I diagonal is the BSDE value function.
  const TypeIProblem p = problem("bsde-reduction");
  auto gap = [&](int Ns) {
    const TriangleGrid g = TriangleGrid::make(1.0, Ns, 8.0, 161);
    const ThetaField th = solve_type1_fd(p, g);
    const Field2D fk = solve_feynman_kac_fd(p.model, [](double x) { return std::sin(x); },
                                            [](double, double, double y, double z) { return 0.5 * std::sin(y) + 0.3 * std::sin(z); }, g);
    double d = 0;
    for (int j = 0; j <= g.Ns; ++j)
      for (int l = 0; l < g.Nx; ++l) d = std::max(d, std::abs(th.diagonal(j)[l] - fk.at(j, l)));
    return d;
  };
  const double d1 = gap(20), d2 = gap(40);
  EXPECT_LT(d2, 2e-5);
  EXPECT_NEAR(std::log2(d1 / d2), 2.0, 0.35);
}
