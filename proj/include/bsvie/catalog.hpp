#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "model.hpp"

namespace bsvie {

using ClosedForm = std::function<double(double t, double s, double xi, double x)>;
using ClosedGamma = std::function<double(double t, double s, double x)>;

struct CatalogEntry {
  std::string name;
  AnyProblem problem;
  ClosedForm closed_form;    // empty when no closed form is known
  ClosedGamma closed_gamma;  // Type-II entries only
  std::string description;
};

namespace detail {

inline SdeModel brownian_model() {
  return make_model(1, 1, {Expr::constant(0.0)}, {Expr::constant(1.0)}, 1.0, 1.0, 1.0);
}

}  // namespace detail

inline std::vector<CatalogEntry> catalog() {
  const VarLayout L{1, 1, 1};
  const SdeModel bm = detail::brownian_model();
  std::vector<CatalogEntry> out;

  {
    CatalogEntry e;
    e.name = "heat-terminal-x";
    e.problem = make_type1(e.name, bm, 1, 1.0, {Expr::affine(0.0, {{L.x(0), 1.0}})}, {Expr::constant(0.0)}, 1.0);
    e.closed_form = [](double, double, double, double x) { return x; };
    e.description = "b=0, sigma=1, g=0, psi=x";
    out.push_back(e);
  }
  {
    const double c = 0.7;
    CatalogEntry e;
    e.name = "constant-generator";
    e.problem = make_type1(e.name, bm, 1, 1.0, {Expr::constant(0.0)}, {Expr::constant(c)}, 1.0);
    e.closed_form = [c](double, double s, double, double) { return c * (1.0 - s); };
    e.description = "g=0.7, psi=0";
    out.push_back(e);
  }
  {
    CatalogEntry e;
    e.name = "diagonal-exponential";
    e.problem = make_type1(e.name, bm, 1, 1.0, {Expr::constant(1.0)}, {Expr::affine(0.0, {{L.y(0), 1.0}})}, 1.0);
    e.closed_form = [](double, double s, double, double) { return std::exp(1.0 - s); };
    e.description = "g=y, psi=1";
    out.push_back(e);
  }
  {
    CatalogEntry e;
    e.name = "t-linear-generator";
    e.problem = make_type1(e.name, bm, 1, 1.0, {Expr::constant(0.0)}, {Expr::affine(0.0, {{L.t(), 1.0}})}, 1.0);
    e.closed_form = [](double t, double s, double, double) { return t * (1.0 - s); };
    e.description = "g=t, psi=0";
    out.push_back(e);
  }
  {
    CatalogEntry e;
    e.name = "type2-unit-zeta";
    e.problem = make_type2(e.name, bm, 1, 1.0, {Expr::affine(0.0, {{L.x(0), 1.0}})},
                           {Expr::affine(0.0, {{L.zeta(0, 0), 1.0}})}, 1.0);
    e.closed_form = [](double, double s, double, double x) { return x + (1.0 - s); };
    e.closed_gamma = [](double t, double, double x) { return x + (1.0 - t); };
    e.description = "Type-II, g=zeta, psi=x";
    out.push_back(e);
  }
  {
    CatalogEntry e;
    e.name = "heat-terminal-sin";
    e.problem = make_type1(e.name, bm, 1, 1.0, {Expr::sine(1.0, 0.0, {{L.x(0), 1.0}})}, {Expr::constant(0.0)}, 1.0);
    e.closed_form = [](double, double s, double, double x) { return std::exp(-0.5 * (1.0 - s)) * std::sin(x); };
    e.description = "g=0, psi=sin x";
    out.push_back(e);
  }
  {
    CatalogEntry e;
    e.name = "nonlinear-t";
    e.problem = make_type1(e.name, bm, 1, 1.0, {Expr::sine(1.0, 0.0, {{L.x(0), 1.0}, {L.t(), 1.0}})},
                           {Expr::sine(0.5, 0.0, {{L.y(0), 1.0}, {L.t(), 1.0}}) +
                            Expr::sine(0.3, 0.0, {{L.z(0, 0), 1.0}, {L.x(0), 1.0}})},
                           1.5);
    e.description = "psi=sin(x+t), g=0.5 sin(y+t)+0.3 sin(z+x)";
    out.push_back(e);
  }
  {
    CatalogEntry e;
    e.name = "bsde-reduction";
    SdeModel mdl = make_model(1, 1, {Expr::sine(0.2, 0.0, {{L.x(0), 1.0}})},
                              {Expr::constant(1.0) + Expr::sine(0.3, 1.5707963267948966, {{L.x(0), 1.0}})},
                              0.5, 0.7, 1.5);
    e.problem = make_type1(e.name, mdl, 1, 1.0, {Expr::sine(1.0, 0.0, {{L.x(0), 1.0}})},
                           {Expr::sine(0.5, 0.0, {{L.y(0), 1.0}}) + Expr::sine(0.3, 0.0, {{L.z(0, 0), 1.0}})},
                           1.5);
    e.description = "g=g(s,y,z), psi=h(x), b=0.2 sin x, sigma=1+0.3 cos x";
    out.push_back(e);
  }
  {
    CatalogEntry e;
    e.name = "type2-sin-zeta";
    e.problem = make_type2(e.name, bm, 1, 1.0, {Expr::sine(1.0, 0.0, {{L.x(0), 1.0}})},
                           {Expr::affine(0.0, {{L.zeta(0, 0), 0.5}})}, 1.0);
    e.description = "Type-II, g=0.5 zeta, psi=sin x";
    out.push_back(e);
  }
  return out;
}

inline std::optional<CatalogEntry> find_catalog(const std::string& name) {
  for (auto& e : catalog())
    if (e.name == name) return e;
  return std::nullopt;
}

}  // namespace bsvie
