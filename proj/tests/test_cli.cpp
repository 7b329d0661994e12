#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "bsvie/cli.hpp"

using namespace bsvie;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("bsvie_cli_" + name);
  fs::remove_all(d);
  return d;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  fs::create_directories(dir);
  const fs::path p = dir / "in.cfg";
  std::ofstream(p) << text;
  return p;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

int run_quiet(const RunOptions& o) {
  std::ostringstream log, err;
  return run(o, log, err);
}

int shell(const std::string& args) {
  const int rc = std::system((std::string(BSVIE_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kSmall =
    "grid.Ns = 16\n"
    "grid.Nx = 65\n"
    "ensemble.paths = 200\n"
    "ensemble.steps = 8\n";

}  // namespace

TEST(Cli, VerifyWritesArtifactsAndManifest) {
  const fs::path d = fresh_dir("verify");
  RunOptions o;
  o.config = write_config(d, std::string("problem.catalog = heat-terminal-x\n") + kSmall).string();
  o.out = (d / "out").string();
  EXPECT_EQ(run_quiet(o), kExitPass);
  for (const char* f : {"config.txt", "manifest.json", "residuals.csv"}) EXPECT_TRUE(fs::exists(d / "out" / f)) << f;
  const auto m = nlohmann::json::parse(std::ifstream(d / "out" / "manifest.json"));
  EXPECT_EQ(m["exit_code"], 0);
  EXPECT_EQ(m["versions"]["bsvie"], kVersion);
  const auto rows = lines(d / "out" / "residuals.csv");
  ASSERT_EQ(rows.size(), 1u + 9u);
  EXPECT_EQ(rows[0].rfind("config_hash,", 0), 0u);
  EXPECT_EQ(rows[1].substr(0, 16), m["config_hash"].get<std::string>());
}

TEST(Cli, RefineFourGivesFourLevels) {
  const fs::path d = fresh_dir("refine");
  RunOptions o;
  o.config = write_config(d, std::string("problem.catalog = diagonal-exponential\n") + kSmall).string();
  o.out = (d / "out").string();
  o.refine = 4;
  EXPECT_EQ(run_quiet(o), kExitPass);
  const auto rows = lines(d / "out" / "convergence.csv");
  ASSERT_EQ(rows.size(), 5u);
  const auto m = nlohmann::json::parse(std::ifstream(d / "out" / "manifest.json"));
  EXPECT_NEAR(m["fitted_order"].get<double>(), 2.0, 0.4);
}

TEST(Cli, SolveWritesFieldFiles) {
  const fs::path d = fresh_dir("solve");
  RunOptions o;
  o.config = write_config(d, std::string("problem.catalog = type2-unit-zeta\npipeline = solve\n") + kSmall).string();
  o.out = (d / "out").string();
  EXPECT_EQ(run_quiet(o), kExitPass);
  EXPECT_TRUE(fs::exists(d / "out" / "mild_solution.bin"));
  EXPECT_EQ(lines(d / "out" / "diagonal.csv").size(), 1u + 17u * 65u);
}

TEST(Cli, ExitCodes) {
  const fs::path d = fresh_dir("codes");
  RunOptions o;
  o.out = (d / "a").string();
  o.problem = "no-such-problem";
  EXPECT_EQ(run_quiet(o), kExitConfig);

  o.problem = "heat-terminal-x";
  o.backend = "monte-carlo";
  EXPECT_EQ(run_quiet(o), kExitConfig);

  // a residual tolerance no ensemble can meet
  RunOptions v;
  v.config = write_config(d, std::string("problem.catalog = heat-terminal-sin\nverify.residual_tol = 1e-12\n") + kSmall)
                 .string();
  v.out = (d / "b").string();
  EXPECT_EQ(run_quiet(v), kExitVerifyFail);
  EXPECT_TRUE(fs::exists(d / "b" / "manifest.json"));

  RunOptions n;
  n.config = write_config(d, std::string("problem.catalog = type2-sin-zeta\nsolver.max_iter = 1\n") + kSmall).string();
  n.out = (d / "c").string();
  EXPECT_EQ(run_quiet(n), kExitNumerical);
}

TEST(Cli, ExecutableParsing) {
  const fs::path d = fresh_dir("exe");
  EXPECT_EQ(shell("list"), 0);
  EXPECT_EQ(shell(""), kExitConfig);
  EXPECT_EQ(shell("run --refine 0 --problem heat-terminal-x --out " + (d / "a").string()), kExitConfig);
  EXPECT_EQ(shell("run --bogus"), kExitConfig);
  const fs::path cfg = write_config(d, std::string("problem.catalog = heat-terminal-x\n") + kSmall);
  EXPECT_EQ(shell("run --config " + cfg.string() + " --seed 5 --out " + (d / "b").string()), 0);
  const auto m = nlohmann::json::parse(std::ifstream(d / "b" / "manifest.json"));
  EXPECT_EQ(m["exit_code"], 0);
  EXPECT_NE(lines(d / "b" / "config.txt").size(), 0u);
}
