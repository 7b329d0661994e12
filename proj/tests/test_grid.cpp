#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "bsvie/grid.hpp"

using namespace bsvie;

TEST(TriangleGrid, GeometryAndKnotLookup) {
  const TriangleGrid g = TriangleGrid::make(2.0, 8, 4.0, 17);
  EXPECT_DOUBLE_EQ(g.ds(), 0.25);
  EXPECT_DOUBLE_EQ(g.h(), 0.5);
  EXPECT_EQ(g.pairs(), 45u);
  EXPECT_EQ(g.knot_index(0.75), 3);
  EXPECT_EQ(g.knot_index(0.8), -1);
  EXPECT_EQ(g.s(8), 2.0);
  EXPECT_DOUBLE_EQ(g.scheme_tolerance(), 0.0625 + 0.25);
  EXPECT_THROW(TriangleGrid::make(1.0, 4, 1.0, 3), Error);
  EXPECT_EQ(TriangleGrid::make(0.0, 5, 1.0, 9).Ns, 0);
}

TEST(ThetaField, InterpolationIsExactOnBilinearData) {
  const TriangleGrid g = TriangleGrid::make(1.0, 4, 2.0, 21);
  const ThetaField th = ThetaField::from_function(
      g, 2, true, [](double t, double s, double xi, double x, int c) { return c + t - s + 2 * xi - 3 * x + xi * x; });
  EXPECT_NEAR(th.value(1, 3, 0.33, -0.71, 1), 1 + 0.25 - 0.75 + 0.66 + 2.13 - 0.33 * 0.71, 1e-13);
  EXPECT_NEAR(th.dx(1, 3, 0.33, -0.71), -3 + 0.33, 1e-12);
  for (int j = 0; j <= 4; ++j)
    for (int l = 0; l < 21; ++l) {
      const double x = g.axis().at(l);
      EXPECT_NEAR(th.diagonal(j, 0)[l], 2 * x - 3 * x + x * x, 1e-13);
    }
}

TEST(ThetaField, CollapsedXiAxisIgnoresXi) {
  const TriangleGrid g = TriangleGrid::make(1.0, 3, 1.0, 11);
  const ThetaField th = ThetaField::from_function(g, 1, false, [](double, double s, double, double x, int) { return s * x; });
  EXPECT_EQ(th.n_xi, 1);
  EXPECT_EQ(th.row(0, 2, 7), th.row(0, 2, 0));
  EXPECT_NEAR(th.value(0, 2, -0.9, 0.5), 2.0 / 3 * 0.5, 1e-14);
}

TEST(ThetaField, BinaryRoundTrip) {
  const TriangleGrid g = TriangleGrid::make(1.0, 5, 3.0, 13);
  const ThetaField th =
      ThetaField::from_function(g, 1, true, [](double t, double s, double xi, double x, int) { return std::sin(t + 2 * s + xi * x); });
  const auto path = std::filesystem::temp_directory_path() / "bsvie_test_theta.bin";
  write_theta(path.string(), th, "abc");
  const ThetaField r = read_theta(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(r.values, th.values);
  EXPECT_EQ(r.diag, th.diag);
  EXPECT_EQ(r.grid.Nx, 13);
  EXPECT_EQ(r.n_xi, 13);
}

TEST(Field2D, EvalAndCrop) {
  const Field2D f =
      Field2D::sample(uniform_knots(0.0, 1.0, 4), UniformAxis{-3.0, 0.25, 25}, [](double s, double x) { return s + x * x * x; });
  // cubic in x is reproduced, linear in time
  EXPECT_NEAR(f.eval(0.6, 0.37), 0.6 + 0.37 * 0.37 * 0.37, 1e-12);
  const Field2D c = f.crop(1.0);
  EXPECT_EQ(c.x.N, 9);
  EXPECT_DOUBLE_EQ(c.x.lo, -1.0);
  EXPECT_DOUBLE_EQ(c.at(2, 0), f.at(2, 8));
}

TEST(Field2D, CentralDifferences) {
  std::vector<double> row(9);
  for (int l = 0; l < 9; ++l) row[l] = 0.5 * l * l;
  EXPECT_DOUBLE_EQ(diff_x(row, 1.0, 4), 4.0);
  EXPECT_DOUBLE_EQ(diff_xx(row, 1.0, 4), 1.0);
}
