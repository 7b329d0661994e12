#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "expr.hpp"
#include "util.hpp"

namespace bsvie {

using CoefFn = std::function<void(double s, std::span<const double> x, std::span<double> out)>;
using TerminalFn =
    std::function<void(double t, std::span<const double> xi, std::span<const double> x, std::span<double> out)>;

struct GenArgs {
  double t = 0, s = 0;
  std::span<const double> xi, x, y, z, zeta;
};

// One x-row of generator evaluations at fixed (t, s, xi). Arrays are
// node-major: y[l*m + c], z[(l*m + c)*d + q]. zeta is constant along the row.
struct RowArgs {
  double t = 0, s = 0;
  std::span<const double> xi;
  std::span<const double> x;
  std::span<const double> y;
  std::span<const double> z;
  std::span<const double> zeta;
  std::span<double> out;
};

using PointGenerator = std::function<void(const GenArgs&, std::span<double>)>;
using RowGenerator = std::function<void(const RowArgs&)>;

struct Generator {
  PointGenerator point;
  RowGenerator row;
  bool uses_z = true;  // false lets row callers skip the gradient

  void operator()(const GenArgs& a, std::span<double> out) const { point(a, out); }
  explicit operator bool() const { return static_cast<bool>(point); }
};

// Wraps a pointwise functor; the row loop is instantiated for the concrete
// functor type so the per-node call inlines.
template <class F>
Generator make_generator(F f) {
  Generator g;
  g.point = f;
  g.row = [f](const RowArgs& r) {
    const std::size_t N = r.x.size();
    const std::size_t m = N ? r.out.size() / N : 0;
    const std::size_t md = N ? r.z.size() / N : 0;
    for (std::size_t l = 0; l < N; ++l) {
      GenArgs a;
      a.t = r.t;
      a.s = r.s;
      a.xi = r.xi;
      a.x = r.x.subspan(l, 1);
      a.y = r.y.subspan(l * m, m);
      a.z = r.z.subspan(l * md, md);
      a.zeta = r.zeta;
      f(a, r.out.subspan(l * m, m));
    }
  };
  return g;
}

// Evaluates the generator with the symmetric extension to t > s.
inline void eval_extended(const Generator& g, GenArgs a, std::span<double> out) {
  if (a.t > a.s) std::swap(a.t, a.s);
  g(a, out);
}

struct SdeModel {
  int n = 1, d = 1;
  CoefFn b;
  CoefFn sigma;  // n*d, row-major
  double lipschitz_L = 1.0;
  double sigma_bar = 1.0;
  double bound_M = 1.0;
  bool constant_coefficients = false;
  std::vector<Expr> b_expr, sigma_expr;  // empty when the model is opaque

  // a = sigma sigma^T / 2 for n = 1.
  double diffusion_a(double s, double x) const {
    double sig[8];
    std::span<double> sp(sig, static_cast<std::size_t>(d));
    sigma(s, std::span<const double>(&x, 1), sp);
    double a = 0.0;
    for (int q = 0; q < d; ++q) a += sig[q] * sig[q];
    return 0.5 * a;
  }
  double drift(double s, double x) const {
    double out = 0.0;
    b(s, std::span<const double>(&x, 1), std::span<double>(&out, 1));
    return out;
  }
};

struct ProblemData {
  std::string name;
  SdeModel model;
  int m = 1;
  double T = 1.0;
  TerminalFn psi;
  Generator g;
  double lipschitz_L = 1.0;
  bool xi_dependent = true;
  std::vector<Expr> psi_expr, g_expr;

  VarLayout layout() const { return VarLayout{model.n, m, model.d}; }
  bool declarative() const {
    return !psi_expr.empty() && !g_expr.empty() && !model.b_expr.empty() && !model.sigma_expr.empty();
  }
};

struct TypeIProblem : ProblemData {};

struct TypeIIProblem : ProblemData {
  bool zeta_dependent = true;
};

using AnyProblem = std::variant<TypeIProblem, TypeIIProblem>;

inline const ProblemData& data_of(const AnyProblem& p) {
  return std::visit([](const auto& q) -> const ProblemData& { return q; }, p);
}

namespace detail {

inline void check_vars(const std::vector<Expr>& es, const VarLayout& L, std::vector<int> allowed,
                       const char* what) {
  for (const auto& e : es)
    for (int k = 0; k < L.size(); ++k)
      if (e.uses(k) && std::find(allowed.begin(), allowed.end(), k) == allowed.end())
        fail(ErrorCode::ConfigInvalid, std::string(what) + " may not depend on '" + L.name(k) + "'");
}

inline std::vector<int> range_vars(int lo, int count) {
  std::vector<int> v;
  for (int i = 0; i < count; ++i) v.push_back(lo + i);
  return v;
}

}  // namespace detail

inline SdeModel make_model(int n, int d, std::vector<Expr> b, std::vector<Expr> sigma, double L,
                           double sigma_bar, double M) {
  if (static_cast<int>(b.size()) != n || static_cast<int>(sigma.size()) != n * d)
    fail(ErrorCode::ConfigInvalid, "drift needs n entries and diffusion n*d entries");
  const VarLayout lay{n, 1, d};
  std::vector<int> allowed = detail::range_vars(lay.x(0), n);
  allowed.push_back(lay.s());
  detail::check_vars(b, lay, allowed, "drift");
  detail::check_vars(sigma, lay, allowed, "diffusion");
  SdeModel mdl;
  mdl.n = n;
  mdl.d = d;
  mdl.lipschitz_L = L;
  mdl.sigma_bar = sigma_bar;
  mdl.bound_M = M;
  mdl.b_expr = b;
  mdl.sigma_expr = sigma;
  bool constant = true;
  for (const auto* es : {&b, &sigma})
    for (const auto& e : *es)
      for (int k = 0; k < lay.size(); ++k)
        if (e.uses(k)) constant = false;
  mdl.constant_coefficients = constant;
  auto make = [lay](std::vector<Expr> es) {
    return CoefFn([lay, es](double s, std::span<const double> x, std::span<double> out) {
      double v[64] = {};
      v[lay.s()] = s;
      for (int i = 0; i < lay.n; ++i) v[lay.x(i)] = x[i];
      for (std::size_t k = 0; k < es.size(); ++k) out[k] = es[k].eval(v);
    });
  };
  mdl.b = make(b);
  mdl.sigma = make(sigma);
  return mdl;
}

namespace detail {

inline Generator expr_generator(const std::vector<Expr>& es, const VarLayout lay) {
  Generator g;
  g.point = [es, lay](const GenArgs& a, std::span<double> out) {
    double v[256];
    std::fill_n(v, lay.size(), 0.0);
    v[lay.t()] = a.t;
    v[lay.s()] = a.s;
    for (int i = 0; i < lay.n; ++i) {
      v[lay.xi(i)] = a.xi[i];
      v[lay.x(i)] = a.x[i];
    }
    for (int i = 0; i < lay.m; ++i) v[lay.y(i)] = a.y[i];
    for (int k = 0; k < lay.m * lay.d; ++k) v[lay.z(0, 0) + k] = a.z[k];
    for (std::size_t k = 0; k < a.zeta.size(); ++k) v[lay.zeta(0, 0) + k] = a.zeta[k];
    for (std::size_t c = 0; c < es.size(); ++c) out[c] = es[c].eval(v);
  };
  // Each term splits into a row-constant part (t, s, xi, zeta) and a
  // per-node part (x, y, z).
  struct Flat {
    Term::Kind kind;
    double amp, c;
    std::vector<std::pair<int, double>> fixed, node;
  };
  std::vector<std::vector<Flat>> flat(es.size());
  const int node_lo = lay.x(0), node_hi = lay.zeta(0, 0);
  for (std::size_t c = 0; c < es.size(); ++c)
    for (const auto& t : es[c].terms) {
      Flat f{t.kind, t.amp, t.c, {}, {}};
      for (const auto& [k, w] : t.w) (k >= node_lo && k < node_hi ? f.node : f.fixed).emplace_back(k - (k >= node_lo && k < node_hi ? node_lo : 0), w);
      flat[c].push_back(std::move(f));
    }
  g.uses_z = false;
  for (const auto& e : es)
    for (int k = 0; k < lay.m * lay.d; ++k) g.uses_z = g.uses_z || e.uses(lay.z(0, 0) + k);
  g.row = [flat, lay, node_lo](const RowArgs& r) {
    double v[256];
    std::fill_n(v, lay.size(), 0.0);
    v[lay.t()] = r.t;
    v[lay.s()] = r.s;
    v[lay.xi(0)] = r.xi[0];
    for (std::size_t k = 0; k < r.zeta.size(); ++k) v[lay.zeta(0, 0) + k] = r.zeta[k];
    const int m = lay.m, md = lay.m * lay.d;
    const std::size_t N = r.x.size();
    const int ybase = lay.y(0) - node_lo, zbase = lay.z(0, 0) - node_lo;
    double nv[256];
    for (int c = 0; c < m; ++c) {
      double* out = r.out.data();
      for (std::size_t l = 0; l < N; ++l) out[l * m + c] = 0.0;
      for (const Flat& f : flat[c]) {
        double base = f.c;
        for (const auto& [k, w] : f.fixed) base += w * v[k];
        if (f.kind == Term::Kind::Const) {
          for (std::size_t l = 0; l < N; ++l) out[l * m + c] += f.c;
          continue;
        }
        if (f.node.empty()) {
          const double val = f.kind == Term::Kind::Sin ? f.amp * std::sin(base) : base;
          for (std::size_t l = 0; l < N; ++l) out[l * m + c] += val;
          continue;
        }
        for (std::size_t l = 0; l < N; ++l) {
          nv[0] = r.x[l];
          for (int i = 0; i < m; ++i) nv[ybase + i] = r.y[l * m + i];
          for (int k = 0; k < md; ++k) nv[zbase + k] = r.z[l * md + k];
          double a = base;
          for (const auto& [k, w] : f.node) a += w * nv[k];
          out[l * m + c] += f.kind == Term::Kind::Sin ? f.amp * std::sin(a) : a;
        }
      }
    }
  };
  return g;
}

inline TerminalFn expr_terminal(const std::vector<Expr>& es, const VarLayout lay) {
  return [es, lay](double t, std::span<const double> xi, std::span<const double> x, std::span<double> out) {
    double v[256];
    std::fill_n(v, lay.size(), 0.0);
    v[lay.t()] = t;
    for (int i = 0; i < lay.n; ++i) {
      v[lay.xi(i)] = xi[i];
      v[lay.x(i)] = x[i];
    }
    for (std::size_t c = 0; c < es.size(); ++c) out[c] = es[c].eval(v);
  };
}

template <class P>
P make_problem_impl(std::string name, SdeModel model, int m, double T, std::vector<Expr> psi,
                    std::vector<Expr> g, double L, bool type2) {
  const VarLayout lay{model.n, m, model.d};
  if (lay.size() > 256) fail(ErrorCode::ConfigInvalid, "problem dimensions too large");
  if (static_cast<int>(psi.size()) != m || static_cast<int>(g.size()) != m)
    fail(ErrorCode::ConfigInvalid, "terminal and generator need m components");
  std::vector<int> psi_vars{lay.t()};
  for (int i = 0; i < lay.n; ++i) {
    psi_vars.push_back(lay.xi(i));
    psi_vars.push_back(lay.x(i));
  }
  check_vars(psi, lay, psi_vars, "terminal");
  if (!type2) {
    std::vector<int> g_vars;
    for (int k = 0; k < lay.zeta(0, 0); ++k) g_vars.push_back(k);
    check_vars(g, lay, g_vars, "Type-I generator");
  }
  P p;
  p.name = std::move(name);
  p.model = std::move(model);
  p.m = m;
  p.T = T;
  p.lipschitz_L = L;
  p.psi_expr = psi;
  p.g_expr = g;
  p.psi = expr_terminal(psi, lay);
  p.g = expr_generator(g, lay);
  bool xi_dep = false;
  for (const auto* es : {&psi, &g})
    for (const auto& e : *es)
      for (int i = 0; i < lay.n; ++i) xi_dep = xi_dep || e.uses(lay.xi(i));
  p.xi_dependent = xi_dep;
  if constexpr (std::is_same_v<P, TypeIIProblem>) {
    bool zd = false;
    for (const auto& e : g)
      for (int k = 0; k < lay.m * lay.d; ++k) zd = zd || e.uses(lay.zeta(0, 0) + k);
    p.zeta_dependent = zd;
  }
  return p;
}

}  // namespace detail

inline TypeIProblem make_type1(std::string name, SdeModel model, int m, double T, std::vector<Expr> psi,
                               std::vector<Expr> g, double L) {
  return detail::make_problem_impl<TypeIProblem>(std::move(name), std::move(model), m, T, std::move(psi),
                                                 std::move(g), L, false);
}

inline TypeIIProblem make_type2(std::string name, SdeModel model, int m, double T, std::vector<Expr> psi,
                                std::vector<Expr> g, double L) {
  return detail::make_problem_impl<TypeIIProblem>(std::move(name), std::move(model), m, T, std::move(psi),
                                                  std::move(g), L, true);
}

struct ValidationOptions {
  int samples = 10000;
  double box = 8.0;     // |x|, |xi| range
  double y_box = 4.0;   // |y| range
  double z_box = 4.0;   // |z|, |zeta| range
  double fd_step = 1e-5;
  double rel_slack = 1e-6;
};

struct ValidationReport {
  bool pass = true;
  double model_quotient = 0;     // max over x-directions of |db| + |dsigma|
  double problem_quotient = 0;   // max over directions of |dg| + |dpsi|
  double min_ellipticity = 0;    // min |sigma^T v| / |v|
  double max_coefficient = 0;    // max |b| + |sigma|
  double max_psi = 0, max_g = 0;
  std::vector<std::string> messages;
};

namespace detail {

inline double norm2(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) fail(ErrorCode::NonFiniteCoefficient, std::string(what) + " returned a non-finite value");
}

}  // namespace detail

inline ValidationReport validate_problem(const ProblemData& p, bool type2, const ValidationOptions& o = {}) {
  ValidationReport rep;
  const SdeModel& M = p.model;
  const VarLayout lay = p.layout();
  const int n = M.n, d = M.d, m = p.m;
  const int nvar = lay.size();
  std::vector<double> u(static_cast<std::size_t>(nvar) + static_cast<std::size_t>(n));
  std::vector<double> v(static_cast<std::size_t>(nvar));
  std::vector<double> bv(n), sv(n * d), bv2(n), sv2(n * d), pv(m), pv2(m), gv(m), gv2(m);
  std::vector<double> dir(n);
  rep.min_ellipticity = INFINITY;
  const double hstep = o.fd_step;

  auto fill = [&](std::span<const double> unit) {
    v[lay.t()] = unit[0] * p.T;
    v[lay.s()] = unit[1] * p.T;
    if (v[lay.t()] > v[lay.s()]) std::swap(v[lay.t()], v[lay.s()]);
    for (int i = 0; i < n; ++i) {
      v[lay.xi(i)] = (2 * unit[lay.xi(i)] - 1) * o.box;
      v[lay.x(i)] = (2 * unit[lay.x(i)] - 1) * o.box;
    }
    for (int i = 0; i < m; ++i) v[lay.y(i)] = (2 * unit[lay.y(i)] - 1) * o.y_box;
    for (int k = 0; k < 2 * m * d; ++k) v[lay.z(0, 0) + k] = (2 * unit[lay.z(0, 0) + k] - 1) * o.z_box;
  };
  auto eval_model = [&](const std::vector<double>& w, std::vector<double>& b, std::vector<double>& s) {
    std::span<const double> x(w.data() + lay.x(0), n);
    M.b(w[lay.s()], x, b);
    M.sigma(w[lay.s()], x, s);
    detail::require_finite(b, "drift");
    detail::require_finite(s, "diffusion");
  };
  auto eval_problem = [&](const std::vector<double>& w, std::vector<double>& ps, std::vector<double>& gs) {
    std::span<const double> xi(w.data() + lay.xi(0), n), x(w.data() + lay.x(0), n);
    p.psi(w[lay.t()], xi, x, ps);
    GenArgs a;
    a.t = w[lay.t()];
    a.s = w[lay.s()];
    a.xi = xi;
    a.x = x;
    a.y = std::span<const double>(w.data() + lay.y(0), m);
    a.z = std::span<const double>(w.data() + lay.z(0, 0), m * d);
    if (type2) a.zeta = std::span<const double>(w.data() + lay.zeta(0, 0), m * d);
    p.g(a, gs);
    detail::require_finite(ps, "terminal");
    detail::require_finite(gs, "generator");
  };
  auto diff = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };

  std::vector<int> problem_dirs{lay.t()};
  for (int i = 0; i < n; ++i) {
    problem_dirs.push_back(lay.xi(i));
    problem_dirs.push_back(lay.x(i));
  }
  for (int i = 0; i < m; ++i) problem_dirs.push_back(lay.y(i));
  for (int k = 0; k < m * d; ++k) problem_dirs.push_back(lay.z(0, 0) + k);
  if (type2)
    for (int k = 0; k < m * d; ++k) problem_dirs.push_back(lay.zeta(0, 0) + k);

  for (int smp = 0; smp < o.samples; ++smp) {
    halton(static_cast<std::uint64_t>(smp), std::span<double>(u.data(), static_cast<std::size_t>(nvar) + n));
    fill(u);
    eval_model(v, bv, sv);
    eval_problem(v, pv, gv);
    rep.max_coefficient = std::max(rep.max_coefficient, detail::norm2(bv) + detail::norm2(sv));
    rep.max_psi = std::max(rep.max_psi, detail::norm2(pv));
    rep.max_g = std::max(rep.max_g, detail::norm2(gv));

    // Ellipticity along a low-discrepancy unit direction and the axes.
    for (int trial = 0; trial <= n; ++trial) {
      for (int i = 0; i < n; ++i)
        dir[i] = trial < n ? (i == trial ? 1.0 : 0.0) : 2 * u[static_cast<std::size_t>(nvar) + i] - 1;
      const double dn = detail::norm2(dir);
      if (dn < 1e-12) continue;
      double st2 = 0;
      for (int q = 0; q < d; ++q) {
        double acc = 0;
        for (int i = 0; i < n; ++i) acc += sv[i * d + q] * dir[i];
        st2 += acc * acc;
      }
      rep.min_ellipticity = std::min(rep.min_ellipticity, std::sqrt(st2) / dn);
    }

    for (int i = 0; i < n; ++i) {
      auto vp = v, vm = v;
      vp[lay.x(i)] += hstep;
      vm[lay.x(i)] -= hstep;
      eval_model(vp, bv, sv);
      eval_model(vm, bv2, sv2);
      rep.model_quotient = std::max(rep.model_quotient, (diff(bv, bv2) + diff(sv, sv2)) / (2 * hstep));
    }
    for (int k : problem_dirs) {
      auto vp = v, vm = v;
      vp[k] += hstep;
      vm[k] -= hstep;
      eval_problem(vp, pv, gv);
      eval_problem(vm, pv2, gv2);
      rep.problem_quotient = std::max(rep.problem_quotient, (diff(gv, gv2) + diff(pv, pv2)) / (2 * hstep));
    }
  }

  if (rep.min_ellipticity < M.sigma_bar * (1 - 1e-12))
    fail(ErrorCode::EllipticityViolated, "min |sigma^T v|/|v| = " + format_double(rep.min_ellipticity) +
                                             " below declared " + format_double(M.sigma_bar));
  const double slack = 1 + o.rel_slack;
  if (rep.model_quotient > M.lipschitz_L * slack) {
    rep.pass = false;
    rep.messages.push_back("drift/diffusion Lipschitz quotient " + format_double(rep.model_quotient) +
                           " exceeds declared " + format_double(M.lipschitz_L));
  }
  if (rep.max_coefficient > M.bound_M * slack) {
    rep.pass = false;
    rep.messages.push_back("|b|+|sigma| reaches " + format_double(rep.max_coefficient) + " above bound " +
                           format_double(M.bound_M));
  }
  if (rep.problem_quotient > p.lipschitz_L * slack) {
    rep.pass = false;
    rep.messages.push_back("generator/terminal Lipschitz quotient " + format_double(rep.problem_quotient) +
                           " exceeds declared " + format_double(p.lipschitz_L));
  }
  return rep;
}

inline ValidationReport validate_problem(const TypeIProblem& p, const ValidationOptions& o = {}) {
  return validate_problem(p, false, o);
}
inline ValidationReport validate_problem(const TypeIIProblem& p, const ValidationOptions& o = {}) {
  return validate_problem(p, true, o);
}
inline ValidationReport validate_problem(const AnyProblem& p, const ValidationOptions& o = {}) {
  return std::visit([&](const auto& q) { return validate_problem(q, o); }, p);
}

}  // namespace bsvie
