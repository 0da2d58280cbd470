#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Run cli(const testutil::TempDir& dir, const std::string& args) {
  const auto out = dir.path() / "stdout.txt", err = dir.path() / "stderr.txt";
  const std::string cmd = std::string(JSONBAG_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const testutil::TempDir& dir) {
  const auto path = dir.path() / "tiny.json";
  std::ofstream(path) << R"({"game": "connect4", "task": "agents", "gamesPerClass": 8, "seed": 4,
    "agents": [{"name": "Random", "type": "random"}, {"name": "OSLA", "type": "osla"},
               {"name": "M4", "type": "mcts", "budget": 4}],
    "forest": {"nTrees": 10},
    "policyDistance": {"games": 2, "states": 10, "samples": 10}})";
  return path;
}

}  // namespace

TEST(Cli, GenerateIsReproducible) {
  testutil::TempDir dir;
  const auto config = write_config(dir);
  const auto a = cli(dir, "generate --config " + config.string() + " --out " + (dir.path() / "a").string());
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("24 trajectories (3 classes x 8 games)"), std::string::npos) << a.out;
  const auto b = cli(dir, "generate --config " + config.string() + " --out " + (dir.path() / "b").string() + " --jobs 3");
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(slurp(dir.path() / "a" / "manifest.json"), slurp(dir.path() / "b" / "manifest.json"));

  const auto again = cli(dir, "generate --config " + config.string() + " --out " + (dir.path() / "a").string());
  EXPECT_EQ(again.code, 1);
  EXPECT_NE(again.err.find("--force"), std::string::npos) << again.err;
}

TEST(Cli, MissingConfigFails) {
  testutil::TempDir dir;
  const auto r = cli(dir, "generate --config " + (dir.path() / "none.json").string() + " --out " +
                              (dir.path() / "x").string());
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, ClassifyNshotAndReport) {
  testutil::TempDir dir;
  const auto config = write_config(dir);
  const auto run = (dir.path() / "run").string();
  ASSERT_EQ(cli(dir, "generate --config " + config.string() + " --out " + run).code, 0);

  const auto c = cli(dir, "classify --out " + run + " --methods jsd,cosine");
  ASSERT_EQ(c.code, 0) << c.err;
  const auto results = fs::path(run) / "results" / "connect4" / "agents";
  const auto jsd = slurp(results / "jsd.csv");
  EXPECT_EQ(std::count(jsd.begin(), jsd.end(), '\n'), 2);
  EXPECT_EQ(jsd.substr(0, jsd.find('\n')), "method,accuracy,ci_low,ci_high,n_train,n_test");
  EXPECT_TRUE(fs::exists(results / "cosine.csv"));
  EXPECT_TRUE(fs::exists(results / "confusion_jsd.csv"));
  EXPECT_FALSE(fs::exists(results / "rf.csv"));

  ASSERT_EQ(cli(dir, "classify --out " + run + " --methods rf").code, 0);
  EXPECT_TRUE(fs::exists(results / "importance_rf.csv"));

  const auto bad = cli(dir, "classify --out " + run + " --methods jsd,knn");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("rf-baseline"), std::string::npos) << bad.err;

  const auto n = cli(dir, "nshot --out " + run + " --n 1,2,3 --trials 20");
  ASSERT_EQ(n.code, 0) << n.err;
  const auto table = slurp(results / "nshot.csv");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
  EXPECT_NE(table.find(",20\n"), std::string::npos);

  const auto rep = cli(dir, "report " + run);
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_NE(rep.out.find("connect4/agents"), std::string::npos);
  EXPECT_TRUE(fs::exists(fs::path(run) / "summary.csv"));

  const auto pd = cli(dir, "policy-distance --out " + run);
  ASSERT_EQ(pd.code, 0) << pd.err;
  EXPECT_TRUE(fs::exists(results / "correlation_connect4.csv"));
}

TEST(Cli, MissingDatasetIsExplicit) {
  testutil::TempDir dir;
  const auto r = cli(dir, "classify --out " + (dir.path() / "nothing").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("manifest"), std::string::npos) << r.err;
}

TEST(Cli, ReportOnEmptyDirectory) {
  testutil::TempDir dir;
  fs::create_directories(dir.path() / "runs");
  const auto r = cli(dir, "report " + (dir.path() / "runs").string());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("empty summary"), std::string::npos);
}

TEST(Cli, PolicyDistanceForAGame) {
  testutil::TempDir dir;
  const auto r = cli(dir, "policy-distance --game connect4 --jobs 1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("agent,Random,OSLA,MCTS64,MCTS256,MCTS64-C0.3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("pearson r"), std::string::npos);
}

TEST(Cli, TokenizeFile) {
  testutil::TempDir dir;
  const auto path = dir.path() / "s.json";
  std::ofstream(path) << R"({"currentAge": 2, "playerResources": [{"Wood": 2}, {"Wood": 2}]})";
  const auto r = cli(dir, "tokenize " + path.string() + " --mode unordered --counts");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "1\t.currentAge.2\n2\t.playerResources.Wood.2\n");
  EXPECT_EQ(cli(dir, "tokenize " + path.string() + " --mode sideways").code, 1);
}
