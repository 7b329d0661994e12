#include <gtest/gtest.h>

#include <cmath>

#include "bsvie/catalog.hpp"
#include "bsvie/model.hpp"

using namespace bsvie;

namespace {

const VarLayout L{1, 1, 1};

SdeModel brownian() { return make_model(1, 1, {Expr::constant(0.0)}, {Expr::constant(1.0)}, 1.0, 1.0, 1.0); }

ValidationOptions quick() {
  ValidationOptions o;
  o.samples = 2000;
  return o;
}

}  // namespace

TEST(Validate, HeatTerminalPasses) {
  const auto p = make_type1("x", brownian(), 1, 1.0, {Expr::affine(0.0, {{L.x(0), 1.0}})}, {Expr::constant(0.0)}, 1.0);
  const ValidationReport r = validate_problem(p, quick());
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.max_g, 0.0);
  EXPECT_NEAR(r.problem_quotient, 1.0, 1e-8);  // from psi = x alone
  EXPECT_EQ(r.model_quotient, 0.0);
  EXPECT_DOUBLE_EQ(r.min_ellipticity, 1.0);
}

TEST(Validate, ZeroDiffusionIsNotElliptic) {
  const SdeModel M = make_model(1, 1, {Expr::constant(0.0)}, {Expr::constant(0.0)}, 1.0, 1.0, 1.0);
  const auto p = make_type1("flat", M, 1, 1.0, {Expr::constant(0.0)}, {Expr::constant(0.0)}, 1.0);
  try {
    validate_problem(p, quick());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EllipticityViolated);
  }
}

TEST(Validate, UnderstatedLipschitzConstantIsCaught) {
  const auto p = make_type1("siny", brownian(), 1, 1.0, {Expr::constant(0.0)},
                            {Expr::sine(1.0, 0.0, {{L.y(0), 1.0}})}, 0.5);
  const ValidationReport r = validate_problem(p, quick());
  EXPECT_FALSE(r.pass);
  // sup |cos y| = 1 is attained near y = 0.
  EXPECT_GT(r.problem_quotient, 0.99);
  EXPECT_LT(r.problem_quotient, 1.0 + 1e-6);
  ASSERT_FALSE(r.messages.empty());
}

TEST(Validate, CatalogEntriesPass) {
  for (const auto& e : catalog()) {
    const ValidationReport r = validate_problem(e.problem, quick());
    EXPECT_TRUE(r.pass) << e.name << ": " << (r.messages.empty() ? "" : r.messages[0]);
  }
}

TEST(Catalog, LookupByName) {
  ASSERT_TRUE(find_catalog("heat-terminal-x"));
  EXPECT_FALSE(find_catalog("no-such-problem"));
  const auto e = *find_catalog("diagonal-exponential");
  EXPECT_NEAR(e.closed_form(0.2, 0.4, 1.0, -3.0), std::exp(0.6), 1e-15);
  const auto u = *find_catalog("type2-unit-zeta");
  EXPECT_DOUBLE_EQ(u.closed_form(0.1, 0.25, 2.0, 0.5), 0.5 + 0.75);
  EXPECT_DOUBLE_EQ(u.closed_gamma(0.3, 0.1, 2.0), 2.0 + 0.7);
}

TEST(Catalog, XiIndependentProblemsAreMarked) {
  EXPECT_FALSE(std::get<TypeIProblem>(find_catalog("heat-terminal-x")->problem).xi_dependent);
  EXPECT_FALSE(std::get<TypeIProblem>(find_catalog("bsde-reduction")->problem).xi_dependent);
}

TEST(Generator, RowPathMatchesPointPath) {
  const auto e = *find_catalog("nonlinear-t");
  const auto& p = std::get<TypeIProblem>(e.problem);
  const int N = 7;
  std::vector<double> x(N), y(N), z(N), out(N);
  for (int l = 0; l < N; ++l) {
    x[l] = -1.5 + 0.5 * l;
    y[l] = std::cos(l);
    z[l] = 0.1 * l;
  }
  const double xi = 0.4;
  RowArgs r;
  r.t = 0.2;
  r.s = 0.6;
  r.xi = std::span<const double>(&xi, 1);
  r.x = x;
  r.y = y;
  r.z = z;
  r.out = out;
  p.g.row(r);
  for (int l = 0; l < N; ++l) {
    GenArgs a;
    a.t = 0.2;
    a.s = 0.6;
    a.xi = std::span<const double>(&xi, 1);
    a.x = std::span<const double>(&x[l], 1);
    a.y = std::span<const double>(&y[l], 1);
    a.z = std::span<const double>(&z[l], 1);
    double v;
    p.g(a, std::span<double>(&v, 1));
    const double expect = 0.5 * std::sin(y[l] + 0.2) + 0.3 * std::sin(z[l] + x[l]);
    EXPECT_NEAR(v, expect, 1e-15);
    EXPECT_NEAR(out[l], expect, 1e-15);
  }
}
