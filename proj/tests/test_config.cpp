#include <gtest/gtest.h>

#include <string>

#include "bsvie/catalog.hpp"
#include "bsvie/config.hpp"

using namespace bsvie;

namespace {

std::string erase_line(std::string text, const std::string& key) {
  const auto at = text.find(key + " =");
  const auto end = text.find('\n', at);
  return text.erase(at, end - at + 1);
}

}  // namespace

TEST(Config, ExperimentRoundTripAndHash) {
  const ExperimentConfig c = parse_experiment(
      "# comment\n"
      "problem.catalog = heat-terminal-sin\n"
      "grid.Ns = 40   # trailing comment\n"
      "grid.Nx = 81\n"
      "ensemble.seed = 17\n"
      "solver.backend = picard\n"
      "pipeline = solve\n");
  EXPECT_EQ(c.grid.Ns, 40);
  EXPECT_EQ(c.grid.R, 8.0);
  EXPECT_EQ(c.ensemble.seed, 17u);
  EXPECT_EQ(c.solver.backend, "picard");
  const ExperimentConfig back = parse_experiment(experiment_to_config(c));
  EXPECT_EQ(experiment_to_config(back), experiment_to_config(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  ExperimentConfig other = c;
  other.ensemble.seed = 18;
  EXPECT_NE(config_hash(other), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Config, InlineProblemEqualsCatalogEntry) {
  const AnyProblem ref = find_catalog("bsde-reduction")->problem;
  const std::string text = problem_to_config(ref);
  const ExperimentConfig c = parse_experiment(text + "grid.Ns = 10\n");
  EXPECT_EQ(problem_to_config(c.problem), text);
  EXPECT_TRUE(std::holds_alternative<TypeIProblem>(c.problem));
  const ProblemData& p = data_of(c.problem);
  const double x = 0.7;
  double a, b;
  p.model.sigma(0.0, std::span<const double>(&x, 1), std::span<double>(&a, 1));
  data_of(ref).model.sigma(0.0, std::span<const double>(&x, 1), std::span<double>(&b, 1));
  EXPECT_EQ(a, b);
}

TEST(Config, MissingKeyIsNamed) {
  const std::string text = erase_line(problem_to_config(find_catalog("heat-terminal-x")->problem), "model.sigma[0]");
  try {
    parse_experiment(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
    EXPECT_NE(std::string(e.what()).find("model.sigma[0]"), std::string::npos) << e.what();
  }
}

TEST(Config, InvalidValuesAreRejected) {
  for (const char* bad : {"problem.catalog = nope\n", "problem.catalog = heat-terminal-x\nsolver.backend = mc\n",
                          "problem.catalog = heat-terminal-x\ngrid.Ns = 2.5\n",
                          "problem.catalog = heat-terminal-x\ngrid.Nx = abc\n",
                          "problem.catalog = heat-terminal-x\npipeline = train\n",
                          "problem.catalog = heat-terminal-x\nno equals sign\n", "grid.Ns = 4\n"}) {
    try {
      parse_experiment(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid) << bad;
    }
  }
}

TEST(Config, VariablesOutsideTheirRoleAreRejected) {
  std::string text = problem_to_config(find_catalog("heat-terminal-x")->problem);
  const auto at = text.find("model.b[0] = ");
  text.replace(at, text.find('\n', at) - at, "model.b[0] = affine(c=0, y=1)");
  EXPECT_THROW(parse_experiment(text), Error);
}
