#include <gtest/gtest.h>

#include <cmath>

#include "bsvie/catalog.hpp"
#include "bsvie/norms.hpp"

using namespace bsvie;

TEST(Holder, LinearInSpace) {
  const Field2D f = Field2D::sample(uniform_knots(0.0, 1.0, 4), UniformAxis{-2.0, 0.25, 17}, [](double, double x) { return x; });
  const HolderReport r = holder_report(f, 0.5, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(r.sup, 2.0);
  EXPECT_NEAR(r.sup_x, 1.0, 1e-14);
  EXPECT_NEAR(r.sup_xx, 0.0, 1e-12);
  EXPECT_EQ(r.time_semi, 0.0);
  // pairs are taken up to distance one, where |x - y| / |x - y|^alpha peaks
  EXPECT_NEAR(r.space_semi, 1.0, 1e-14);
  EXPECT_NEAR(r.holder_1, 3.0, 1e-14);
}

TEST(Holder, CheckerboardPeaksAtNearestNeighbours) {
  const double h = 0.1;
  Field2D f(uniform_knots(0.0, 1.0, 2), UniformAxis{-1.0, h, 21});
  for (int j = 0; j < 3; ++j)
    for (int l = 0; l < 21; ++l) f.at(j, l) = l % 2 ? 1.0 : -1.0;
  EXPECT_NEAR(holder_report(f, 0.5, 0.0, 1.0).space_semi, 2 / std::sqrt(h), 1e-12);
}

TEST(Holder, SquareRootInTime) {
  const int J = 64;
  const Field2D f =
      Field2D::sample(uniform_knots(0.0, 1.0, J), UniformAxis{-1.0, 0.5, 5}, [](double s, double) { return std::sqrt(s); });
  const HolderReport r = holder_report(f, 0.5, 0.0, 1.0);
  // (sqrt b - sqrt a) / (b - a)^e peaks at a = 0: b = 1 for e = 1/4, b = ds for e = 3/4.
  EXPECT_NEAR(r.time_semi, 1.0, 1e-12);
  EXPECT_NEAR(r.time_semi_1a, std::pow(1.0 / J, -0.25), 1e-12);
  EXPECT_THROW(holder_report(f, 0.5, 0.5, 1.5), Error);
}

TEST(XNorm, HomogeneousAndSubadditive) {
  const TriangleGrid g = TriangleGrid::make(1.0, 6, 2.0, 17);
  auto a = ThetaField::from_function(g, 1, true, [](double t, double s, double xi, double x, int) {
    return std::sin(x + t) * std::cos(s) + 0.3 * xi * x;
  });
  auto b = ThetaField::from_function(g, 1, true, [](double t, double s, double xi, double x, int) {
    return x * x * (1 - s) - t * xi;
  });
  ThetaField sum = a, scaled = a;
  for (std::size_t q = 0; q < a.values.size(); ++q) {
    sum.values[q] = a.values[q] + b.values[q];
    scaled.values[q] = -3 * a.values[q];
  }
  const double na = xnorm(a, 0.0).value, nb = xnorm(b, 0.0).value;
  EXPECT_NEAR(xnorm(scaled, 0.0).value, 3 * na, 1e-10 * na);
  EXPECT_LE(xnorm(sum, 0.0).value, na + nb + 1e-12);
  EXPECT_LE(xnorm(a, 0.5).value, na + 1e-12);
  EXPECT_THROW(xnorm(a, 1.5), Error);
}

TEST(Probe, ExactWindowSolutions) {
  // a = 1/2, f = sin x: v(S) = 2 (1 - e^{-w/2}) sin x; f = 1: v(S) = w.
  ProbeOptions o;
  o.Nx = 161;
  o.steps_per_window = 32;
  const std::vector<double> w{0.5, 0.25, 0.125};
  const ProbeReport s = window_scaling_probe({0.5, 0.0}, [](double, double x) { return std::sin(x); }, w, o);
  ASSERT_EQ(s.rows.size(), 3u);
  for (const auto& r : s.rows) EXPECT_NEAR(r.sup, 2 * (1 - std::exp(-r.window / 2)), 2e-3 * r.window);
  const double exact = std::log((1 - std::exp(-0.25)) / (1 - std::exp(-0.0625))) / std::log(4.0);
  EXPECT_NEAR(s.slope_sup, exact, 0.01);

  const ProbeReport c = window_scaling_probe({0.5, 0.0}, [](double, double) { return 1.0; }, w, o);
  for (const auto& r : c.rows) {
    EXPECT_NEAR(r.sup, r.window, 1e-12);
    EXPECT_LT(r.sup_x, 1e-12);
  }
  EXPECT_NEAR(c.slope_sup, 1.0, 1e-9);
}
