#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <exception>
#include <thread>
#include <vector>

namespace bsvie {

// Counter-based normal variates: every draw is a pure function of
// (seed, path, step, component), so any subset of paths is reproducible.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                                  std::uint64_t lane) {
  std::uint64_t h = mix64(seed ^ 0x5851f42d4c957f2dULL);
  h = mix64(h ^ path);
  h = mix64(h ^ (step * 0x2545f4914f6cdd1dULL + 1));
  return mix64(h ^ (lane + 0x632be59bd9b4e019ULL));
}

inline double to_unit_open(std::uint64_t u) {
  return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
}

inline double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                             std::uint64_t comp) {
  const double u1 = to_unit_open(counter_hash(seed, path, step, 2 * comp));
  const double u2 = to_unit_open(counter_hash(seed, path, step, 2 * comp + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

inline unsigned nth_prime(unsigned k) {
  static const unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                    43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101};
  return primes[k % (sizeof(primes) / sizeof(primes[0]))];
}

// Halton point i in [0,1)^dim (index offset by one to skip the origin).
inline void halton(std::uint64_t i, std::span<double> out) {
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = radical_inverse(i + 1, nth_prime(static_cast<unsigned>(k)));
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline int& default_threads() {
  static int n = 1;
  return n;
}

// Static block split; results never depend on the thread count because
// every index writes its own output.
template <class F>
void parallel_for(std::size_t n, F&& fn, int threads = 0) {
  if (threads <= 0) threads = default_threads();
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nt);
  pool.reserve(nt);
  for (std::size_t w = 0; w < nt; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = n * w / nt, hi = n * (w + 1) / nt;
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

}  // namespace bsvie
