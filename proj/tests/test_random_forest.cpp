#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "jsonbag/random_forest.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace jsonbag;

namespace {

using Rows = std::vector<std::vector<double>>;

ForestConfig single_tree(std::size_t max_features) {
  ForestConfig c;
  c.n_trees = 1;
  c.bootstrap = false;
  c.max_features = max_features;
  return c;
}

}  // namespace

TEST(Gini, Values) {
  const std::vector<std::size_t> pure = {4, 0}, even = {2, 2}, three = {1, 1, 1};
  EXPECT_EQ(gini(pure, 4), 0.0);
  EXPECT_DOUBLE_EQ(gini(even, 4), 0.5);
  EXPECT_NEAR(gini(three, 3), 2.0 / 3.0, 1e-15);
}

TEST(Tree, SeparableSingleFeatureIsOneSplit) {
  const Rows x = {{0.1}, {0.2}, {0.3}, {0.7}, {0.8}};
  const std::vector<std::string> y = {"a", "a", "a", "b", "b"};
  const auto f = fit_forest(x, y, single_tree(1));
  const auto& t = f.trees().front();
  EXPECT_EQ(t.depth(), 1u);
  EXPECT_DOUBLE_EQ(t.nodes().front().threshold, 0.5);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(f.predict(x[i]), y[i]);
}

TEST(Tree, IdenticalLabelsGiveOneLeaf) {
  const Rows x = {{1.0, 2.0}, {3.0, 4.0}, {5.0, 0.0}};
  const std::vector<std::string> y(3, "same");
  const auto f = fit_forest(x, y, single_tree(2));
  EXPECT_EQ(f.trees().front().nodes().size(), 1u);
}

TEST(Tree, XorNeedsDepthTwo) {
  const Rows x = {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const std::vector<std::string> y = {"a", "b", "b", "a", "a", "b", "b", "a"};
  const auto f = fit_forest(x, y, single_tree(2));
  // The root of XOR has zero gain on both features, so greedy CART stops
  // there unless the data is tilted. Add one tilting sample.
  Rows x2 = x;
  auto y2 = y;
  x2.push_back({0, 0});
  y2.push_back("a");
  const auto g = fit_forest(x2, y2, single_tree(2));
  EXPECT_EQ(g.trees().front().depth(), 2u);
  for (std::size_t i = 0; i < x2.size(); ++i) EXPECT_EQ(g.predict(x2[i]), y2[i]);
  EXPECT_EQ(f.trees().front().nodes().size(), 1u);
}

TEST(Tree, InvariantsOnRandomData) {
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    Rows x(30, std::vector<double>(4));
    std::vector<std::string> y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      for (auto& v : x[i]) v = uniform_real(rng, 0.0, 1.0);
      y[i] = std::string(1, static_cast<char>('a' + rng() % 3));
    }
    const auto f = fit_forest(x, y, single_tree(4));
    const auto& nodes = f.trees().front().nodes();
    for (const auto& n : nodes) {
      EXPECT_NEAR(std::accumulate(n.proba.begin(), n.proba.end(), 0.0), 1.0, 1e-12);
      if (n.is_leaf()) continue;
      bool below = false, above = false;
      for (const auto& r : x) {
        below |= r[static_cast<std::size_t>(n.feature)] < n.threshold;
        above |= r[static_cast<std::size_t>(n.feature)] > n.threshold;
      }
      EXPECT_TRUE(below && above);
    }
    // Distinct feature rows: an unrestricted tree fits the training set.
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(f.predict(x[i]), y[i]);
  }
}

TEST(Tree, MatchesExhaustiveSplitOracle) {
  Rng rng(2);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 4 + rng() % 9;
    Rows x(n, std::vector<double>(3));
    std::vector<std::string> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : x[i]) v = static_cast<double>(rng() % 4);
      y[i] = std::string(1, static_cast<char>('a' + rng() % 3));
    }
    const auto forest = fit_forest(x, y, single_tree(3));
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    const auto oracle = testutil::oracle_fit(x, y, all);
    for (int probe = 0; probe < 20; ++probe) {
      std::vector<double> q(3);
      for (auto& v : q) v = static_cast<double>(rng() % 5) - 0.5;
      EXPECT_EQ(forest.predict(q), testutil::oracle_predict(*oracle, q)) << "rep " << rep;
    }
    for (const auto& r : x) EXPECT_EQ(forest.predict(r), testutil::oracle_predict(*oracle, r));
  }
}

TEST(Forest, SeparableBlobs) {
  Rng rng(3);
  std::normal_distribution<double> noise(0.0, 0.3);
  Rows x;
  std::vector<std::string> y;
  for (int i = 0; i < 200; ++i) {
    const bool b = i % 2 == 1;
    x.push_back({(b ? 2.0 : 0.0) + noise(rng), (b ? 2.0 : 0.0) + noise(rng), noise(rng)});
    y.push_back(b ? "b" : "a");
  }
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < x.size(); ++i) (i < 100 ? train : test).push_back(i);
  Rows xt;
  std::vector<std::string> yt;
  for (auto i : train) {
    xt.push_back(x[i]);
    yt.push_back(y[i]);
  }
  ForestConfig c;
  c.seed = 7;
  const auto f = fit_forest(xt, yt, c);
  EXPECT_GE(evaluate(f, x, y, test).accuracy, 0.95);
  for (const auto& r : x) {
    const auto p = f.predict_proba(r);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Forest, SingleTreeWithoutBootstrapEqualsFitTree) {
  Rng rng(4);
  Rows x(40, std::vector<double>(5));
  std::vector<std::string> y(40);
  std::vector<std::size_t> yi(40);
  for (std::size_t i = 0; i < 40; ++i) {
    for (auto& v : x[i]) v = uniform_real(rng, 0.0, 1.0);
    yi[i] = rng() % 2;
    y[i] = yi[i] ? "b" : "a";
  }
  auto c = single_tree(2);
  c.seed = 9;
  const auto f = fit_forest(x, y, c);
  Rng tree_rng(derive_seed(c.seed, 0));
  std::vector<std::size_t> all(40);
  std::iota(all.begin(), all.end(), 0);
  const auto t = fit_tree(x, yi, 2, all, c, tree_rng);
  for (const auto& r : x) EXPECT_EQ(f.predict(r), t.predict(r) ? "b" : "a");
}

TEST(Forest, DeterministicAcrossJobs) {
  Rng rng(5);
  Rows x(60, std::vector<double>(6));
  std::vector<std::string> y(60);
  for (std::size_t i = 0; i < 60; ++i) {
    for (auto& v : x[i]) v = uniform_real(rng, 0.0, 1.0);
    y[i] = std::string(1, static_cast<char>('a' + rng() % 4));
  }
  ForestConfig c;
  c.n_trees = 30;
  c.seed = 11;
  const auto a = fit_forest(x, y, c);
  c.jobs = 4;
  const auto b = fit_forest(x, y, c);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(a.feature_importance(), b.feature_importance());
}

TEST(Importance, SingleSplitFeatureGetsEverything) {
  const Rows x = {{5.0, 0.1}, {5.0, 0.2}, {5.0, 0.8}, {5.0, 0.9}};
  const std::vector<std::string> y = {"a", "a", "b", "b"};
  const auto imp = fit_forest(x, y, single_tree(2)).feature_importance();
  EXPECT_EQ(imp, (std::vector<double>{0.0, 1.0}));
}

TEST(Importance, NoiseFeatureNearZero) {
  Rng rng(6);
  Rows x;
  std::vector<std::string> y;
  for (int i = 0; i < 300; ++i) {
    const bool b = rng() % 2;
    x.push_back({uniform_real(rng, 0.0, 1.0), (b ? 1.0 : 0.0) + uniform_real(rng, 0.0, 0.5)});
    y.push_back(b ? "b" : "a");
  }
  ForestConfig c;
  c.seed = 3;
  c.max_features = 2;
  const auto imp = fit_forest(x, y, c).feature_importance();
  EXPECT_NEAR(imp[0] + imp[1], 1.0, 1e-9);
  EXPECT_LT(imp[0] / imp[1], 0.1);
}

TEST(Forest, PersistenceRoundTrip) {
  const Rows x = {{0.0, 1.0}, {1.0, 0.0}, {0.5, 0.5}, {0.2, 0.9}};
  const std::vector<std::string> y = {"a", "b", "b", "a"};
  ForestConfig c;
  c.n_trees = 5;
  const auto f = fit_forest(x, y, c);
  const auto g = forest_from_json(to_json(f));
  for (const auto& r : x) EXPECT_EQ(f.predict_proba(r), g.predict_proba(r));
  EXPECT_EQ(g.classes(), f.classes());
}

TEST(Forest, ConfigValidation) {
  ForestConfig c;
  c.n_trees = 0;
  const Rows x = {{0.0}, {1.0}};
  const std::vector<std::string> y = {"a", "b"};
  EXPECT_THROW(fit_forest(x, y, c), Error);
  c.n_trees = 1;
  c.max_features = 2;
  EXPECT_THROW(fit_forest(x, y, c), Error);
}
