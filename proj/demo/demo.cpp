// Solves two catalog problems and checks them along simulated paths.
#include <cmath>
#include <cstdio>

#include "bsvie/catalog.hpp"
#include "bsvie/pde_type1.hpp"
#include "bsvie/pde_type2.hpp"
#include "bsvie/repr.hpp"
#include "bsvie/sde.hpp"

using namespace bsvie;

int main() {
  const double x0 = 0.0;
  const TriangleGrid g = TriangleGrid::make(1.0, 40, 8.0, 161);

  const auto heat = *find_catalog("heat-terminal-sin");
  const auto& p1 = std::get<TypeIProblem>(heat.problem);
  const ThetaField th = solve_type1_fd(p1, g);
  std::printf("%s\n   s      Theta(s,s,1,1)  exact\n", heat.name.c_str());
  for (int j = 0; j <= g.Ns; j += 10)
    std::printf("  %.2f   %.8f      %.8f\n", g.s(j), th.value(j, j, 1.0, 1.0), heat.closed_form(g.s(j), g.s(j), 1.0, 1.0));

  const PathEnsemble ens = simulate(p1.model, std::span<const double>(&x0, 1), TimeGrid::uniform(1.0, 40), 2000, 1);
  const ResidualStats r1 = bsvie_residual(p1, type1_evaluator(th, p1.model, ens), ens, false);
  std::printf("  residual rms along %d paths: %.3e\n\n", r1.n_used, r1.rms);

  const auto sz = *find_catalog("type2-sin-zeta");
  const auto& p2 = std::get<TypeIIProblem>(sz.problem);
  const TriangleGrid g2 = TriangleGrid::make(1.0, 40, 6.0, 97);
  const MildSolution sol = solve_type2(p2, g2);
  std::printf("%s: outer loop\n", sz.name.c_str());
  for (const auto& e : sol.log) std::printf("  iteration %d  update %.3e\n", e.iteration, e.update);
  const PathEvaluator ev = type2_evaluator(sol, p2.model, ens);
  std::printf("  residual rms %.3e, M-residual rms %.3e\n", bsvie_residual(p2, ev, ens, true).rms,
              msolution_residual(ev, ens).rms);
  return 0;
}
