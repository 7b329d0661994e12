#include <CLI11.hpp>

#include "bsvie/cli.hpp"

int main(int argc, char** argv) {
  bsvie::RunOptions o;
  CLI::App app{"BSVIE representation solver"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "run a pipeline or a suite");
  run->add_option("--config", o.config, "experiment config file");
  run->add_option("--suite", o.suite, "named suite (acceptance)");
  run->add_option("--problem", o.problem, "catalog problem");
  run->add_option("--backend", o.backend, "fd, picard or kernel");
  run->add_option("--refine", o.refine, "levels of a convergence sweep")->check(CLI::Range(1, 12));
  run->add_option("--out", o.out, "output directory");
  std::uint64_t seed = 0;
  auto* seed_opt = run->add_option("--seed", seed, "ensemble seed");
  run->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  auto* list = app.add_subcommand("list", "list catalog problems");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : bsvie::kExitConfig;
  }
  if (list->parsed()) {
    for (const auto& e : bsvie::catalog()) std::cout << e.name << "  " << e.description << "\n";
    return 0;
  }
  if (*seed_opt) o.seed = seed;
  return bsvie::run(o);
}
