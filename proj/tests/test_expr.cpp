#include <gtest/gtest.h>

#include <cmath>

#include "bsvie/catalog.hpp"
#include "bsvie/config.hpp"
#include "bsvie/expr.hpp"

using namespace bsvie;

TEST(Expr, EvaluatesEachPrimitive) {
  const VarLayout L{1, 1, 1};
  std::vector<double> v(L.size(), 0.0);
  v[L.x(0)] = 0.3;
  v[L.y(0)] = -1.2;
  EXPECT_DOUBLE_EQ(Expr::constant(2.5).eval(v.data()), 2.5);
  EXPECT_DOUBLE_EQ(Expr::affine(1.0, {{L.x(0), 2.0}, {L.y(0), 0.5}}).eval(v.data()), 1.0 + 0.6 - 0.6);
  EXPECT_DOUBLE_EQ(Expr::sine(0.7, 0.1, {{L.x(0), 3.0}}).eval(v.data()), 0.7 * std::sin(0.1 + 0.9));
  const Expr sum = Expr::constant(1.0) + Expr::sine(1.0, 0.0, {{L.y(0), 1.0}});
  EXPECT_DOUBLE_EQ(sum.eval(v.data()), 1.0 + std::sin(-1.2));
}

TEST(Expr, TextFormRoundTripsExactly) {
  const VarLayout L{1, 1, 1};
  const Expr e = Expr::affine(0.1, {{L.zeta(0, 0), 1.0 / 3}}) + Expr::sine(0.3, 1.5707963267948966, {{L.x(0), -2.0}}) +
                 Expr::constant(-7e-12);
  const std::string text = format_expr(e, L);
  const Expr back = parse_expr(text, L);
  EXPECT_EQ(back, e);
  EXPECT_EQ(format_expr(back, L), text);
}

TEST(Expr, CatalogProblemsRoundTripThroughConfig) {
  for (const auto& e : catalog()) {
    const std::string text = problem_to_config(e.problem);
    const AnyProblem back = problem_from_config(text);
    EXPECT_EQ(problem_to_config(back), text) << e.name;
    EXPECT_EQ(back.index(), e.problem.index()) << e.name;
  }
}

TEST(Expr, LipschitzOfSineTermIsAmplitudeTimesWeight) {
  const VarLayout L{1, 1, 1};
  const Term t = Expr::sine(0.5, 0.0, {{L.y(0), 3.0}}).terms[0];
  EXPECT_DOUBLE_EQ(t.lipschitz(L.y(0)), 1.5);
  EXPECT_DOUBLE_EQ(t.lipschitz(L.x(0)), 0.0);
}

TEST(Expr, MalformedTextIsConfigInvalid) {
  const VarLayout L{1, 1, 1};
  for (const char* bad : {"cos(x=1)", "affine(c=1, q=2)", "const(abc)", "affine(c=1", "sin(amp=1, x)"}) {
    try {
      parse_expr(bad, L);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid) << bad;
    }
  }
}
