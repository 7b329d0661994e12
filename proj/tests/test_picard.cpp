#include <gtest/gtest.h>

#include <cmath>

#include "bsvie/catalog.hpp"
#include "bsvie/picard.hpp"

using namespace bsvie;

namespace {

TypeIProblem problem(const std::string& name) { return std::get<TypeIProblem>(find_catalog(name)->problem); }

double interior_error(const ThetaField& th, const ClosedForm& exact, double r) {
  const TriangleGrid& g = th.grid;
  const UniformAxis ax = g.axis();
  double e = 0;
  for (int j = 0; j <= g.Ns; ++j)
    for (int i = 0; i <= j; ++i)
      for (int l = 0; l < g.Nx; ++l)
        if (std::abs(ax.at(l)) <= r)
          e = std::max(e, std::abs(th.at(i, j, 0, l) - exact(g.s(i), g.s(j), 0.0, ax.at(l))));
  return e;
}

}  // namespace

TEST(Picard, HeatSineMatchesClosedForm) {
  const auto e = *find_catalog("heat-terminal-sin");
  const PicardResult r = solve_type1_picard(problem(e.name), TriangleGrid::make(1.0, 16, 8.0, 81));
  EXPECT_LT(interior_error(r.field, e.closed_form, 4.0), 5e-3);
}

TEST(Picard, DiagonalFeedbackAndWindowLog) {
  const auto e = *find_catalog("diagonal-exponential");
  PicardOptions o;
  o.tol = 1e-9;
  const PicardResult r = solve_type1_picard(problem(e.name), TriangleGrid::make(1.0, 16, 4.0, 21), o);
  EXPECT_LT(interior_error(r.field, e.closed_form, 4.0), 5e-3);
  ASSERT_FALSE(r.windows.empty());
  EXPECT_NEAR(r.windows.front().S_hi, 1.0, 1e-12);
  EXPECT_NEAR(r.windows.back().S, 0.0, 1e-12);
  for (const auto& w : r.windows) {
    ASSERT_FALSE(w.updates.empty());
    EXPECT_LT(w.updates.back(), o.tol);
  }
  EXPECT_GT(r.total_iterations, 0);
}

TEST(Picard, WindowMapContracts) {
  const ContractionSample c = measure_contraction(problem("nonlinear-t"), TriangleGrid::make(1.0, 16, 4.0, 21), 2, 3);
  EXPECT_GT(c.ratio, 0.0);
  EXPECT_LT(c.ratio, 1.0);
  EXPECT_NEAR(c.window, 0.125, 1e-12);
}

TEST(Picard, NeedsConstantCoefficients) {
  try {
    solve_type1_picard(problem("bsde-reduction"), TriangleGrid::make(1.0, 4, 4.0, 21));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
}
