#include <gtest/gtest.h>

#include <cmath>

#include "bsvie/catalog.hpp"
#include "bsvie/pde_type2.hpp"

using namespace bsvie;

namespace {

TypeIIProblem problem(const std::string& name) { return std::get<TypeIIProblem>(find_catalog(name)->problem); }

// psi = sin x, g = zeta / 2. Diagonal u = e^{-(1-s)/2} sin(x + (1-s)/2); the
// field and Gamma follow from it in closed form.
double sin_zeta_theta(double t, double s, double xi, double x) {
  return std::exp(-0.5 * (1 - s)) * std::sin(x) + std::exp(-0.5 * (1 - t)) * (std::sin(xi + 0.5 * (1 - s)) - std::sin(xi));
}
double sin_zeta_gamma(double t, double s, double x) { return std::exp(-0.5 * (1 - s)) * std::sin(x + 0.5 * (1 - t)); }

struct Errors {
  double theta = 0, gamma = 0;
};

Errors interior_errors(const MildSolution& sol, const std::function<double(double, double, double, double)>& th,
                       const std::function<double(double, double, double)>& gm, double r) {
  const TriangleGrid& g = sol.theta.grid;
  const UniformAxis ax = g.axis();
  Errors e;
  for (int j = 0; j <= g.Ns; ++j)
    for (int i = 0; i <= j; ++i)
      for (int k = 0; k < sol.theta.n_xi; ++k) {
        if (std::abs(ax.at(k)) > r) continue;
        for (int l = 0; l < g.Nx; ++l)
          if (std::abs(ax.at(l)) <= r)
            e.theta = std::max(e.theta, std::abs(sol.theta.at(i, j, k, l) - th(g.s(i), g.s(j), ax.at(k), ax.at(l))));
      }
  for (int i = 0; i <= g.Ns; ++i)
    for (int j = 0; j <= i; ++j)
      for (int l = 0; l < g.Nx; ++l)
        if (std::abs(ax.at(l)) <= r)
          e.gamma = std::max(e.gamma, std::abs(sol.gamma.row(i, j)[l] - gm(g.s(i), g.s(j), ax.at(l))));
  return e;
}

}  // namespace

TEST(Gamma, QuadraticDiagonalBothBackends) {
  const TriangleGrid g = TriangleGrid::make(1.0, 10, 8.0, 161);
  const UniformAxis ax = g.axis();
  for (const GammaBackend b : {GammaBackend::FD, GammaBackend::Kernel}) {
    const GammaField G = gamma_from_function(g, [](double, double x) { return x * x; }, detail::brownian_model(), b);
    double e = 0;
    for (int i = 0; i <= g.Ns; ++i)
      for (int j = 0; j <= i; ++j)
        for (int l = 60; l <= 100; ++l)  // |x| <= 2, away from the truncation boundary
          e = std::max(e, std::abs(G.row(i, j)[l] - (ax.at(l) * ax.at(l) + g.s(i) - g.s(j))));
    EXPECT_LT(e, 1e-8) << static_cast<int>(b);
  }
}

TEST(Type2, UnitZetaIsReproduced) {
  const auto e = *find_catalog("type2-unit-zeta");
  const MildSolution sol = solve_type2(problem(e.name), TriangleGrid::make(1.0, 8, 4.0, 33));
  EXPECT_TRUE(sol.converged);
  const Errors err = interior_errors(sol, e.closed_form, e.closed_gamma, 2.0);
  EXPECT_LT(err.theta, 1e-9);
  EXPECT_LT(err.gamma, 1e-9);
}

TEST(Type2, SinZetaAgainstClosedForm) {
  const TypeIIProblem p = problem("type2-sin-zeta");
  const MildSolution a = solve_type2(p, TriangleGrid::make(1.0, 12, 6.0, 49));
  const MildSolution b = solve_type2(p, TriangleGrid::make(1.0, 24, 6.0, 97));
  const Errors ea = interior_errors(a, sin_zeta_theta, sin_zeta_gamma, 3.0);
  const Errors eb = interior_errors(b, sin_zeta_theta, sin_zeta_gamma, 3.0);
  EXPECT_LT(eb.theta, 5e-3);
  EXPECT_LT(eb.gamma, 5e-3);
  EXPECT_GT(ea.theta / eb.theta, 3.0);
  // the outer loop update decreases geometrically
  ASSERT_GE(b.log.size(), 3u);
  EXPECT_LT(b.log.back().update, 1e-6);
  EXPECT_LT(b.log[2].update, b.log[1].update);
}

TEST(Type2, KernelGammaAndPicardInnerSolveAgree) {
  const TypeIIProblem p = problem("type2-sin-zeta");
  const TriangleGrid g = TriangleGrid::make(1.0, 12, 6.0, 49);
  Type2Options o;
  o.gamma_backend = GammaBackend::Kernel;
  o.picard_theta = true;
  const MildSolution k = solve_type2(p, g, o);
  const Errors e = interior_errors(k, sin_zeta_theta, sin_zeta_gamma, 3.0);
  EXPECT_LT(e.theta, 2e-2);
  EXPECT_LT(e.gamma, 2e-2);
}

TEST(Type2, MildResidualIsSmallAtTheSolution) {
  const TypeIIProblem p = problem("type2-sin-zeta");
  const MildSolution s1 = solve_type2(p, TriangleGrid::make(1.0, 8, 6.0, 49));
  const MildSolution s2 = solve_type2(p, TriangleGrid::make(1.0, 16, 6.0, 97));
  const double r1 = mild_residual(s1, p), r2 = mild_residual(s2, p);
  EXPECT_LT(r2, r1);
  EXPECT_LT(r2, 5e-2);
}

TEST(Type2, IterationCapRaises) {
  Type2Options o;
  o.max_iter = 1;
  try {
    solve_type2(problem("type2-sin-zeta"), TriangleGrid::make(1.0, 4, 4.0, 17), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MaxIterExceeded);
  }
}

TEST(WindowNorm, LinearField) {
  // theta = x: sup |theta| = R and |theta_x| = 1, so the norm is R + (T - S)^{1/p}.
  const TriangleGrid g = TriangleGrid::make(1.0, 8, 2.0, 17);
  const ThetaField th = ThetaField::from_function(g, 1, false, [](double, double, double, double x, int) { return x; });
  EXPECT_NEAR(window_norm_y(th, 0.25, 1.5), 2.0 + std::pow(0.75, 1 / 1.5), 1e-12);
  EXPECT_THROW(window_norm_y(th, 0.0, 2.0), Error);
}
