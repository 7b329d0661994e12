#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "error.hpp"
#include "field2d.hpp"
#include "model.hpp"

namespace bsvie {

struct KernelParams {
  double a = 0.5;  // sigma^2 / 2
  double b = 0.0;
};

inline KernelParams kernel_params(const SdeModel& M) {
  if (M.n != 1 || !M.constant_coefficients)
    fail(ErrorCode::GridMismatch, "the Gaussian kernel needs a scalar constant-coefficient model");
  return {M.diffusion_a(0.0, 0.0), M.drift(0.0, 0.0)};
}

struct KernelValue {
  double G = 0, G_x = 0, G_xx = 0, G_s = 0;
};

// Fundamental solution of v_s + a v_xx + b v_x = 0 in the backward
// variables (s, x), with pole at (tau, eta).
inline KernelValue gaussian_kernel(double s, double x, double tau, double eta, const KernelParams& p) {
  if (!(s < tau)) fail(ErrorCode::DegenerateInterval, "kernel needs s < tau");
  const double dt = tau - s;
  const double r = eta - x - p.b * dt;
  const double q = 2 * p.a * dt;
  KernelValue k;
  k.G = std::exp(-r * r / (2 * q)) / std::sqrt(2 * std::numbers::pi * q);
  const double gx = r / q;
  k.G_x = k.G * gx;
  k.G_xx = k.G * (gx * gx - 1 / q);
  k.G_s = -p.a * k.G_xx - p.b * k.G_x;
  return k;
}

// out[l] = E[row(x_l + shift + sqrt(var) Z)], Z standard normal. Wide
// kernels use Gaussian weights on the grid itself; narrow ones use a
// trapezoid rule in Z with cubic interpolation of the row.
class GaussianSmoother {
 public:
  GaussianSmoother(const UniformAxis& ax, double shift, double var) : ax_(ax), shift_(shift) {
    const double sd = std::sqrt(std::max(var, 0.0));
    if (sd == 0.0) {
      mode_ = Mode::Shift;
      return;
    }
    if (sd >= 1.25 * ax.h) {
      mode_ = Mode::Grid;
      const int M = static_cast<int>(std::ceil((9 * sd + std::abs(shift)) / ax.h));
      offset_ = -M;
      double sum = 0;
      for (int k = -M; k <= M; ++k) {
        const double z = (k * ax.h - shift) / sd;
        const double w = std::exp(-0.5 * z * z);
        weights_.push_back(w);
        sum += w;
      }
      for (auto& w : weights_) w /= sum;
    } else {
      mode_ = Mode::Nodes;
      const double dz = 0.25;
      double sum = 0;
      for (int k = -36; k <= 36; ++k) {
        const double z = k * dz;
        zs_.push_back(sd * z);
        const double w = std::exp(-0.5 * z * z);
        weights_.push_back(w);
        sum += w;
      }
      for (auto& w : weights_) w /= sum;
    }
  }

  void apply(std::span<const double> in, std::span<double> out) const {
    const int N = ax_.N;
    switch (mode_) {
      case Mode::Shift:
        for (int l = 0; l < N; ++l) out[l] = interp_cubic(in, ax_, ax_.at(l) + shift_);
        return;
      case Mode::Grid:
        for (int l = 0; l < N; ++l) {
          double acc = 0;
          const long base = l + offset_;
          const long K = static_cast<long>(weights_.size());
          if (base >= 0 && base + K - 1 < N) {
            const double* p = in.data() + base;
            for (long k = 0; k < K; ++k) acc += weights_[k] * p[k];
          } else {
            for (long k = 0; k < K; ++k) acc += weights_[k] * extended_value(in, base + k);
          }
          out[l] = acc;
        }
        return;
      case Mode::Nodes:
        for (int l = 0; l < N; ++l) {
          double acc = 0;
          const double c = ax_.at(l) + shift_;
          for (std::size_t k = 0; k < zs_.size(); ++k) acc += weights_[k] * interp_cubic(in, ax_, c + zs_[k]);
          out[l] = acc;
        }
        return;
    }
  }

 private:
  enum class Mode { Shift, Grid, Nodes } mode_ = Mode::Shift;
  UniformAxis ax_;
  double shift_ = 0;
  int offset_ = 0;
  std::vector<double> weights_, zs_;
};

struct KernelApplyResult {
  double value = 0;
  double truncation_error = 0;  // Gaussian mass leaving [-R, R] times sup|f|
  double quadrature_error = 0;  // difference to a half-resolution rule
};

namespace detail {

// int_s^T int G(s,x;tau,eta) f(tau,eta) deta dtau with tau = s + u^2.
inline double kernel_apply_panels(const Field2D& f, double s, double x, const KernelParams& p, int panels,
                                  bool derivative) {
  const double T = f.s.back();
  const double U = std::sqrt(T - s);
  using GL = boost::math::quadrature::gauss<double, 10>;
  double total = 0;
  for (int k = 0; k < panels; ++k) {
    const double u0 = U * k / panels, u1 = U * (k + 1) / panels;
    total += GL::integrate(
        [&](double u) {
          if (u <= 0) return derivative ? 0.0 : 0.0;
          const double dt = u * u, tau = s + dt;
          const double sd = std::sqrt(2 * p.a * dt), mu = x + p.b * dt;
          // E[f(tau, mu + sd Z)] (or the G_x-weighted version) by trapezoid in Z.
          double acc = 0, wsum = 0;
          for (int i = -40; i <= 40; ++i) {
            const double z = 0.2 * i;
            const double w = std::exp(-0.5 * z * z);
            const double val = f.eval(tau, mu + sd * z);
            acc += w * (derivative ? val * z / sd : val);
            wsum += w;
          }
          return 2 * u * acc / wsum;
        },
        u0, u1);
  }
  return total;
}

}  // namespace detail

inline KernelApplyResult kernel_apply(const Field2D& f, double s, double x, const KernelParams& p,
                                      int panels = 64) {
  const double T = f.s.back();
  if (!(s < T)) fail(ErrorCode::DegenerateInterval, "kernel_apply needs s < T");
  KernelApplyResult r;
  r.value = detail::kernel_apply_panels(f, s, x, p, panels, false);
  r.quadrature_error = std::abs(r.value - detail::kernel_apply_panels(f, s, x, p, panels / 2, false));
  double fmax = 0;
  for (double v : f.v) fmax = std::max(fmax, std::abs(v));
  const double dt = T - s, mu = x + p.b * dt, sd = std::sqrt(2 * p.a * dt);
  const double mass = 0.5 * std::erfc((f.x.hi() - mu) / (sd * std::sqrt(2.0))) +
                      0.5 * std::erfc((mu - f.x.lo) / (sd * std::sqrt(2.0)));
  r.truncation_error = mass * fmax * dt;
  return r;
}

// Same integral against G_x: the x-derivative of kernel_apply.
inline KernelApplyResult kernel_apply_dx(const Field2D& f, double s, double x, const KernelParams& p,
                                         int panels = 64) {
  if (!(s < f.s.back())) fail(ErrorCode::DegenerateInterval, "kernel_apply needs s < T");
  KernelApplyResult r;
  r.value = detail::kernel_apply_panels(f, s, x, p, panels, true);
  r.quadrature_error = std::abs(r.value - detail::kernel_apply_panels(f, s, x, p, panels / 2, true));
  return r;
}

// Trapezoid mass of G(s,x;tau,.) on the axis.
inline double kernel_mass(double s, double x, double tau, const UniformAxis& ax, const KernelParams& p) {
  double acc = 0;
  for (int l = 0; l < ax.N; ++l) {
    const double w = (l == 0 || l == ax.N - 1) ? 0.5 : 1.0;
    acc += w * gaussian_kernel(s, x, tau, ax.at(l), p).G;
  }
  return acc * ax.h;
}

// |int G(s,x;r,u) G(r,u;tau,eta) du - G(s,x;tau,eta)| by trapezoid in u.
inline double chapman_kolmogorov_error(double s, double x, double r, double tau, double eta, const UniformAxis& ax,
                                       const KernelParams& p) {
  double acc = 0;
  for (int l = 0; l < ax.N; ++l) {
    const double w = (l == 0 || l == ax.N - 1) ? 0.5 : 1.0;
    const double u = ax.at(l);
    acc += w * gaussian_kernel(s, x, r, u, p).G * gaussian_kernel(r, u, tau, eta, p).G;
  }
  return std::abs(acc * ax.h - gaussian_kernel(s, x, tau, eta, p).G);
}

struct KernelBoundSweep {
  double dt_min = 1e-4, dt_max = 1.0;
  int n_dt = 40;
  double rho_max = 12.0;  // |eta - x| / sqrt(tau - s)
  int n_rho = 600;
};

struct KernelBoundReport {
  double lambda = 0;     // lambda at which the constants were evaluated
  double K0 = 0, K1 = 0, K2 = 0;  // |G|, |G_x|, |G_s| + |G_xx| constants
  double lambda_fit = 0; // largest lambda keeping all three constants bounded on the sweep
};

namespace detail {

inline void kernel_constants(const KernelParams& p, double lambda, const KernelBoundSweep& sw, double rho_max,
                             double& K0, double& K1, double& K2) {
  K0 = K1 = K2 = 0;
  for (int i = 0; i < sw.n_dt; ++i) {
    const double dt = sw.dt_min * std::pow(sw.dt_max / sw.dt_min, static_cast<double>(i) / (sw.n_dt - 1));
    for (int k = -sw.n_rho; k <= sw.n_rho; ++k) {
      const double rho = rho_max * k / sw.n_rho;
      const double dx = rho * std::sqrt(dt);
      const KernelValue kv = gaussian_kernel(0.0, 0.0, dt, dx, p);
      const double wgt = std::exp(lambda * rho * rho);
      K0 = std::max(K0, std::abs(kv.G) * std::sqrt(dt) * wgt);
      K1 = std::max(K1, std::abs(kv.G_x) * dt * wgt);
      K2 = std::max(K2, (std::abs(kv.G_s) + std::abs(kv.G_xx)) * std::pow(dt, 1.5) * wgt);
    }
  }
}

}  // namespace detail

// Constants of |D G| <= K (tau-s)^{-(1+k)/2} exp(-lambda |eta-x|^2/(tau-s)).
// lambda_fit: the largest lambda whose constants do not move by more than
// 1% when the rho range of the sweep is doubled.
inline KernelBoundReport fit_kernel_bounds(const KernelParams& p, double lambda = 0.125,
                                           const KernelBoundSweep& sw = {}) {
  KernelBoundReport r;
  r.lambda = lambda;
  detail::kernel_constants(p, lambda, sw, sw.rho_max, r.K0, r.K1, r.K2);
  auto stable = [&](double lam) {
    double a0, a1, a2, b0, b1, b2;
    detail::kernel_constants(p, lam, sw, sw.rho_max, a0, a1, a2);
    detail::kernel_constants(p, lam, sw, 2 * sw.rho_max, b0, b1, b2);
    return b0 <= 1.01 * a0 && b1 <= 1.01 * a1 && b2 <= 1.01 * a2;
  };
  double lo = 0.0, hi = 1.0 / (4 * p.a) * 1.5;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (stable(mid) ? lo : hi) = mid;
  }
  r.lambda_fit = lo;
  return r;
}

}  // namespace bsvie
