#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bsvie/kernel.hpp"

using namespace bsvie;

TEST(Kernel, DerivativesMatchFiniteDifferences) {
  const KernelParams p{0.8, 0.3};
  const double s = 0.2, x = 0.4, tau = 0.9, eta = 1.1, e = 1e-4;
  const KernelValue k = gaussian_kernel(s, x, tau, eta, p);
  auto G = [&](double ss, double xx) { return gaussian_kernel(ss, xx, tau, eta, p).G; };
  EXPECT_NEAR(k.G_x, (G(s, x + e) - G(s, x - e)) / (2 * e), 1e-7);
  EXPECT_NEAR(k.G_xx, (G(s, x + e) - 2 * G(s, x) + G(s, x - e)) / (e * e), 1e-5);
  EXPECT_NEAR(k.G_s, (G(s + e, x) - G(s - e, x)) / (2 * e), 1e-6);
}

TEST(Kernel, DensityOfShiftedGaussian) {
  const KernelParams p{0.5, 0.0};
  const KernelValue k = gaussian_kernel(0.0, 0.0, 1.0, 0.0, p);
  EXPECT_NEAR(k.G, 1 / std::sqrt(2 * std::numbers::pi), 1e-15);
  EXPECT_THROW(gaussian_kernel(1.0, 0.0, 1.0, 0.0, p), Error);
}

TEST(Kernel, MassAndChapmanKolmogorov) {
  const UniformAxis ax{-20.0, 0.01, 4001};
  for (const KernelParams p : {KernelParams{0.5, 0.0}, KernelParams{0.8, 0.3}}) {
    EXPECT_NEAR(kernel_mass(0.0, 0.3, 0.7, ax, p), 1.0, 1e-12);
    EXPECT_LT(chapman_kolmogorov_error(0.0, 0.3, 0.4, 0.9, -0.2, ax, p), 1e-10);
  }
}

TEST(KernelApply, GaussianMoments) {
  const KernelParams p{0.5, 0.0};
  const UniformAxis ax{-12.0, 0.05, 481};
  const std::vector<double> ks = uniform_knots(0.0, 1.0, 20);
  const double s = 0.25, x = 0.6, w = 1.0 - s;
  const Field2D one = Field2D::sample(ks, ax, [](double, double) { return 1.0; });
  const Field2D lin = Field2D::sample(ks, ax, [](double, double y) { return y; });
  const Field2D quad = Field2D::sample(ks, ax, [](double, double y) { return y * y; });
  EXPECT_NEAR(kernel_apply(one, s, x, p).value, w, 1e-9);
  EXPECT_NEAR(kernel_apply(lin, s, x, p).value, x * w, 1e-9);
  EXPECT_NEAR(kernel_apply(quad, s, x, p).value, x * x * w + w * w / 2, 1e-7);
  // d/dx of the second moment
  EXPECT_NEAR(kernel_apply_dx(quad, s, x, p).value, 2 * x * w, 1e-6);
}

TEST(KernelApply, DriftShiftsTheMean) {
  const KernelParams p{0.5, 0.4};
  const UniformAxis ax{-12.0, 0.05, 481};
  const Field2D lin = Field2D::sample(uniform_knots(0.0, 1.0, 10), ax, [](double, double y) { return y; });
  // int_s^1 (x + b (tau - s)) dtau
  const double s = 0.0, x = -0.5;
  EXPECT_NEAR(kernel_apply(lin, s, x, p).value, x + 0.4 / 2, 1e-9);
}

TEST(GaussianSmoother, ExpectationOfQuadratic) {
  const UniformAxis ax{-10.0, 0.05, 401};
  std::vector<double> row(ax.N), out(ax.N);
  for (int l = 0; l < ax.N; ++l) row[l] = ax.at(l) * ax.at(l);
  for (const double var : {0.0, 1e-3, 0.5}) {
    GaussianSmoother sm(ax, 0.1, var);
    sm.apply(row, out);
    for (int l = 150; l <= 250; ++l) {
      const double m = ax.at(l) + 0.1;
      EXPECT_NEAR(out[l], m * m + var, 1e-6) << var;
    }
  }
}

TEST(KernelBounds, GaussianTailRate) {
  // G ~ exp(-rho^2 / (4a)), so the weighted constants stay bounded exactly for lambda < 1/(4a).
  for (const KernelParams p : {KernelParams{0.5, 0.0}, KernelParams{0.8, 0.3}}) {
    const KernelBoundReport r = fit_kernel_bounds(p, 0.125);
    const double crit = 1 / (4 * p.a);
    EXPECT_LE(r.lambda_fit, crit);
    EXPECT_GE(r.lambda_fit, 0.9 * crit);
    EXPECT_TRUE(std::isfinite(r.K0) && std::isfinite(r.K1) && std::isfinite(r.K2));
  }
  // Without the exponential weight K0 is the peak height times sqrt(tau - s).
  const KernelBoundReport r0 = fit_kernel_bounds({0.5, 0.0}, 0.0);
  EXPECT_NEAR(r0.K0, 1 / std::sqrt(2 * std::numbers::pi), 1e-12);
}
