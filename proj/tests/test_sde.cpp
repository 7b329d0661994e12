#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "bsvie/catalog.hpp"
#include "bsvie/sde.hpp"

using namespace bsvie;

namespace {

SdeModel scaled_brownian(double sigma) {
  return make_model(1, 1, {Expr::constant(0.0)}, {Expr::constant(sigma)}, 1.0, sigma, sigma);
}

}  // namespace

TEST(Simulate, BrownianMomentsAtMaturity) {
  const double x0 = 0.3;
  const PathEnsemble e = simulate(scaled_brownian(1.0), std::span<const double>(&x0, 1), TimeGrid::uniform(1.0, 50),
                                  20000, 11);
  double m1 = 0, m2 = 0;
  for (int p = 0; p < e.n_paths; ++p) {
    const double d = e.x(p, 50) - x0;
    m1 += d;
    m2 += d * d;
  }
  m1 /= e.n_paths;
  m2 /= e.n_paths;
  // standard errors: 1/sqrt(n) for the mean, sqrt(2/n) for the variance
  EXPECT_NEAR(m1, 0.0, 4 / std::sqrt(20000.0));
  EXPECT_NEAR(m2, 1.0, 4 * std::sqrt(2 / 20000.0));
}

TEST(Simulate, IncrementBoundScalesWithSigmaSquared) {
  const double x0 = 0.0;
  const TimeGrid g = TimeGrid::uniform(1.0, 64);
  const double k1 = increment_bound(simulate(scaled_brownian(1.0), std::span<const double>(&x0, 1), g, 4000, 3));
  const double k2 = increment_bound(simulate(scaled_brownian(2.0), std::span<const double>(&x0, 1), g, 4000, 3));
  // max over ~2000 knot pairs of a noisy estimate of 1 drifts upward a little
  EXPECT_GT(k1, 0.95);
  EXPECT_LT(k1, 1.3);
  EXPECT_NEAR(k2 / k1, 4.0, 1e-9);
}

TEST(Simulate, SameSeedSamePaths) {
  const double x0 = 1.0;
  const SdeModel M = std::get<TypeIProblem>(find_catalog("bsde-reduction")->problem).model;
  const TimeGrid g = TimeGrid::uniform(1.0, 16);
  const PathEnsemble a = simulate(M, std::span<const double>(&x0, 1), g, 64, 5);
  const PathEnsemble b = simulate(M, std::span<const double>(&x0, 1), g, 64, 5);
  const PathEnsemble c = simulate(M, std::span<const double>(&x0, 1), g, 64, 6);
  EXPECT_EQ(a.X, b.X);
  EXPECT_NE(a.X, c.X);
}

TEST(Simulate, AntitheticPairsMirrorIncrements) {
  const double x0 = 0.0;
  SimulateOptions o;
  o.antithetic = true;
  const PathEnsemble e =
      simulate(scaled_brownian(1.0), std::span<const double>(&x0, 1), TimeGrid::uniform(1.0, 8), 10, 9, o);
  for (int p = 0; p < 10; p += 2)
    for (int j = 0; j < 8; ++j) EXPECT_EQ(e.dw(p, j), -e.dw(p + 1, j));
}

TEST(Simulate, EulerStepByHand) {
  const double x0 = 0.4;
  const SdeModel M = std::get<TypeIProblem>(find_catalog("bsde-reduction")->problem).model;
  const PathEnsemble e = simulate(M, std::span<const double>(&x0, 1), TimeGrid::uniform(1.0, 4), 3, 1);
  for (int p = 0; p < 3; ++p) {
    double x = x0;
    for (int j = 0; j < 4; ++j) {
      x = x + 0.2 * std::sin(x) * 0.25 + (1 + 0.3 * std::cos(x)) * e.dw(p, j);
      EXPECT_NEAR(e.x(p, j + 1), x, 1e-14);
    }
  }
}

TEST(Coarsen, SharesTheBrownianPath) {
  const double x0 = 0.0;
  const SdeModel M = scaled_brownian(1.0);
  const PathEnsemble f = simulate(M, std::span<const double>(&x0, 1), TimeGrid::uniform(1.0, 12), 20, 2);
  const PathEnsemble c = coarsen(f, M, 3);
  ASSERT_EQ(c.grid.steps(), 4);
  for (int p = 0; p < 20; ++p)
    for (int j = 0; j <= 4; ++j) EXPECT_NEAR(c.x(p, j), f.x(p, 3 * j), 1e-13);
  EXPECT_THROW(coarsen(f, M, 5), Error);
}

TEST(Ensemble, FileRoundTrip) {
  const double x0 = 0.5;
  const PathEnsemble e =
      simulate(scaled_brownian(1.0), std::span<const double>(&x0, 1), TimeGrid::uniform(0.5, 6), 7, 4);
  const auto path = std::filesystem::temp_directory_path() / "bsvie_test_ensemble.bin";
  write_ensemble(path.string(), e);
  const PathEnsemble r = read_ensemble(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(r.X, e.X);
  EXPECT_EQ(r.dW, e.dW);
  EXPECT_EQ(r.grid.knots, e.grid.knots);
  EXPECT_EQ(r.seed, e.seed);
}
