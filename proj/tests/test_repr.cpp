#include <gtest/gtest.h>

#include <cmath>

#include "bsvie/catalog.hpp"
#include "bsvie/pde_type2.hpp"
#include "bsvie/repr.hpp"

using namespace bsvie;

namespace {

PathEnsemble brownian_paths(int steps, int n, std::uint64_t seed, double x0 = 0.0) {
  return simulate(detail::brownian_model(), std::span<const double>(&x0, 1), TimeGrid::uniform(1.0, steps), n, seed);
}

ThetaField closed_field(const CatalogEntry& e, const TriangleGrid& g, bool xi_dep) {
  return ThetaField::from_function(g, 1, xi_dep, [&](double t, double s, double xi, double x, int) {
    return e.closed_form(t, s, xi, x);
  });
}

}  // namespace

TEST(Repr, EvaluatorReadsFieldAlongPaths) {
  const auto e = *find_catalog("heat-terminal-sin");
  const TriangleGrid g = TriangleGrid::make(1.0, 16, 8.0, 641);
  const ThetaField th = closed_field(e, g, false);
  const PathEnsemble ens = brownian_paths(8, 40, 1);
  const SolutionPair sp = collect(type1_evaluator(th, detail::brownian_model(), ens), ens, "test");
  ASSERT_EQ(sp.n_paths, 40);
  double ey = 0, ez = 0;
  for (int p = 0; p < 40; ++p)
    for (int j = 0; j <= 8; ++j) {
      const double t = ens.grid.knots[j], x = ens.x(p, j);
      ey = std::max(ey, std::abs(sp.paths[p].y(j)[0] - std::exp(-0.5 * (1 - t)) * std::sin(x)));
      for (int i = 0; i <= j; ++i)
        ez = std::max(ez, std::abs(sp.paths[p].zu(i, j)[0] - std::exp(-0.5 * (1 - t)) * std::cos(x)));
    }
  // linear interpolation error h^2/8 on a function bounded by one
  EXPECT_LT(ey, 1e-3);
  EXPECT_LT(ez, 2e-3);
}

TEST(Repr, LinearProblemsHaveNoResidual) {
  // Y(t) = X(T) - sum Z dW telescopes to X(t) for Brownian X.
  const TriangleGrid g = TriangleGrid::make(1.0, 20, 8.0, 161);
  const PathEnsemble ens = brownian_paths(10, 200, 4);
  for (const char* name : {"heat-terminal-x", "constant-generator", "t-linear-generator"}) {
    const auto e = *find_catalog(name);
    const TypeIProblem& p = std::get<TypeIProblem>(e.problem);
    const ResidualStats st = bsvie_residual(p, type1_evaluator(closed_field(e, g, false), p.model, ens), ens, false);
    EXPECT_LT(st.rms, 1e-12) << name;
    EXPECT_EQ(st.n_used, 200);
  }
}

TEST(Repr, ResidualShrinksWithTheEnsembleStep) {
  const auto e = *find_catalog("heat-terminal-sin");
  const TypeIProblem& p = std::get<TypeIProblem>(e.problem);
  const TriangleGrid g = TriangleGrid::make(1.0, 64, 8.0, 641);
  const ThetaField th = closed_field(e, g, false);
  const PathEnsemble fine = brownian_paths(64, 400, 8);
  std::vector<double> dts, rms;
  for (const int f : {4, 2, 1}) {
    const PathEnsemble ens = f == 1 ? fine : coarsen(fine, p.model, f);
    dts.push_back(1.0 / ens.grid.steps());
    rms.push_back(bsvie_residual(p, type1_evaluator(th, p.model, ens), ens, false).rms);
  }
  EXPECT_LT(rms[2], rms[0]);
  EXPECT_NEAR(refinement_slope(dts, rms), 0.5, 0.2);
}

TEST(Repr, TypeTwoResidualsVanishForUnitZeta) {
  const auto e = *find_catalog("type2-unit-zeta");
  const TypeIIProblem& p = std::get<TypeIIProblem>(e.problem);
  const TriangleGrid g = TriangleGrid::make(1.0, 10, 8.0, 81);
  MildSolution sol;
  sol.theta = closed_field(e, g, true);
  sol.gamma = gamma_from_function(g, [](double s, double x) { return x + 1 - s; }, p.model, GammaBackend::Kernel);
  const PathEnsemble ens = brownian_paths(10, 100, 2);
  const PathEvaluator ev = type2_evaluator(sol, p.model, ens);
  EXPECT_LT(bsvie_residual(p, ev, ens, true).rms, 1e-10);
  const ResidualStats m = msolution_residual(ev, ens);
  EXPECT_LT(m.rms, 1e-10);
  // the lower triangle is Gamma_x sigma = 1
  const SolutionPair sp = collect(ev, ens, "unit");
  ASSERT_TRUE(sp.has_lower);
  EXPECT_NEAR(sp.paths[3].zl(7, 2)[0], 1.0, 1e-12);
}

TEST(Repr, MResidualNeedsLowerTriangle) {
  const auto e = *find_catalog("heat-terminal-x");
  const TriangleGrid g = TriangleGrid::make(1.0, 10, 8.0, 81);
  const PathEnsemble ens = brownian_paths(10, 10, 2);
  const SolutionPair sp = collect(type1_evaluator(closed_field(e, g, false), detail::brownian_model(), ens), ens, "x");
  EXPECT_THROW(msolution_residual(sp, ens), Error);
}

TEST(Repr, KnotAndDomainChecks) {
  const auto e = *find_catalog("heat-terminal-x");
  const TriangleGrid g = TriangleGrid::make(1.0, 10, 2.0, 21);
  const ThetaField th = closed_field(e, g, false);
  const PathEnsemble off = brownian_paths(7, 10, 2);
  try {
    collect(type1_evaluator(th, detail::brownian_model(), off), off, "x");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::GridMismatch);
  }
  const PathEnsemble outside = brownian_paths(10, 10, 2, 1.9);
  try {
    collect(type1_evaluator(th, detail::brownian_model(), outside), outside, "x");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::PathOutsideDomain);
  }
}
