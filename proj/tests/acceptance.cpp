#include <cstdio>

#include <CLI11.hpp>

#include "bsvie/acceptance.hpp"

int main(int argc, char** argv) {
  bsvie::AcceptanceOptions o;
  CLI::App app{"acceptance suite"};
  app.add_option("--only", o.only, "criterion ids to run");
  app.add_option("--paths", o.paths, "paths per ensemble");
  app.add_option("--seed", o.seed, "ensemble seed");
  CLI11_PARSE(app, argc, argv);
  bool all = true;
  o.on_result = [&](const bsvie::CriterionResult& r) {
    all = all && r.pass;
    std::printf("%s criterion %d (%s) [%.1fs]: %s\n", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds,
                r.detail.c_str());
    std::fflush(stdout);
  };
  bsvie::run_acceptance(o);
  return all ? 0 : 1;
}
