#pragma once

// CART decision trees with Gini impurity and a bagged random forest on top,
// plus mean-decrease-in-impurity feature importance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jsonbag/bag_model.hpp"
#include "jsonbag/classifiers.hpp"
#include "jsonbag/common.hpp"

namespace jsonbag {

struct ForestConfig {
  std::size_t n_trees = 100;
  /// Features tried per split; unset means floor(sqrt(d)).
  std::optional<std::size_t> max_features;
  bool bootstrap = true;
  std::size_t min_samples_leaf = 1;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  std::size_t features_per_split(std::size_t d) const {
    const std::size_t m = max_features.value_or(
        std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d)))));
    if (d == 0) return 0;
    if (m < 1 || m > d) throw Error("ForestConfig: max_features must be in [1, d]");
    return m;
  }

  void validate() const {
    if (n_trees < 1) throw Error("ForestConfig: n_trees must be at least 1");
    if (min_samples_leaf < 1) throw Error("ForestConfig: min_samples_leaf must be at least 1");
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;  // x[feature] <= threshold
  int right = -1;
  std::size_t samples = 0;
  double impurity = 0.0;
  std::vector<double> proba;  // class distribution of the node's samples

  bool is_leaf() const noexcept { return feature < 0; }
};

class DecisionTree {
public:
  DecisionTree() = default;
  DecisionTree(std::vector<TreeNode> nodes, std::size_t n_classes) : nodes_(std::move(nodes)), n_classes_(n_classes) {}

  const TreeNode& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& n = nodes_[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes_[i];
  }

  const std::vector<double>& predict_proba(std::span<const double> x) const { return leaf_for(x).proba; }

  /// Class index with the highest leaf probability; ties go to the lower index.
  std::size_t predict(std::span<const double> x) const {
    const auto& p = predict_proba(x);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }

  std::size_t depth() const { return depth_from(0); }
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t n_classes() const noexcept { return n_classes_; }

private:
  std::size_t depth_from(std::size_t i) const {
    const auto& n = nodes_[i];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)), depth_from(static_cast<std::size_t>(n.right)));
  }

  std::vector<TreeNode> nodes_;
  std::size_t n_classes_ = 0;
};

/// Gini impurity from integer class counts.
inline double gini(std::span<const std::size_t> counts, std::size_t n) {
  if (n == 0) return 0.0;
  double s = 0.0;
  const double nn = static_cast<double>(n);
  for (auto c : counts) {
    const double p = static_cast<double>(c) / nn;
    s += p * p;
  }
  return 1.0 - s;
}

/// Gains closer than this are treated as ties, broken by (feature, threshold).
inline constexpr double kGainTolerance = 1e-12;

namespace detail {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

inline bool better_split(const SplitChoice& cand, const SplitChoice& best) {
  if (best.feature < 0) return true;
  if (cand.gain > best.gain + kGainTolerance) return true;
  if (cand.gain < best.gain - kGainTolerance) return false;
  return std::pair(cand.feature, cand.threshold) < std::pair(best.feature, best.threshold);
}

}  // namespace detail

/// Greedy CART on the rows named by `samples` (repeats allowed, as produced
/// by bootstrapping). Stops at pure nodes, nodes with fewer than
/// 2 * min_samples_leaf samples, or when no split has positive gain.
inline DecisionTree fit_tree(std::span<const std::vector<double>> rows, std::span<const std::size_t> y,
                             std::size_t n_classes, std::vector<std::size_t> samples, const ForestConfig& config,
                             Rng& rng) {
  if (samples.empty()) throw Error("fit_tree: no samples");
  const std::size_t d = rows.empty() ? 0 : rows[samples.front()].size();
  const std::size_t m = config.features_per_split(d);

  std::vector<TreeNode> nodes;
  struct Pending {
    std::size_t node;
    std::vector<std::size_t> samples;
  };
  std::vector<Pending> stack;

  auto make_node = [&](const std::vector<std::size_t>& s) {
    TreeNode node;
    std::vector<std::size_t> counts(n_classes, 0);
    for (auto i : s) ++counts[y[i]];
    node.samples = s.size();
    node.impurity = gini(counts, s.size());
    node.proba.resize(n_classes);
    for (std::size_t k = 0; k < n_classes; ++k)
      node.proba[k] = static_cast<double>(counts[k]) / static_cast<double>(s.size());
    nodes.push_back(std::move(node));
    return nodes.size() - 1;
  };

  stack.push_back({make_node(samples), std::move(samples)});
  std::vector<std::size_t> features(d);
  std::iota(features.begin(), features.end(), 0);
  std::vector<std::size_t> order;
  std::vector<std::size_t> left_counts(n_classes), right_counts(n_classes), total_counts(n_classes);

  while (!stack.empty()) {
    auto [id, s] = std::move(stack.back());
    stack.pop_back();
    const std::size_t n = s.size();
    if (nodes[id].impurity <= 0.0 || n < 2 * config.min_samples_leaf || d == 0) continue;

    std::fill(total_counts.begin(), total_counts.end(), 0);
    for (auto i : s) ++total_counts[y[i]];

    // Partial Fisher-Yates: the first m entries become the candidate set.
    for (std::size_t k = 0; k < m; ++k) {
      const auto j = k + uniform_index(rng, d - k);
      std::swap(features[k], features[j]);
    }

    detail::SplitChoice best;
    for (std::size_t k = 0; k < m; ++k) {
      const auto f = features[k];
      order = s;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows[a][f] < rows[b][f]; });
      std::fill(left_counts.begin(), left_counts.end(), 0);
      right_counts = total_counts;
      for (std::size_t pos = 0; pos + 1 < n; ++pos) {
        const auto c = y[order[pos]];
        ++left_counts[c];
        --right_counts[c];
        const double lo = rows[order[pos]][f];
        const double hi = rows[order[pos + 1]][f];
        if (!(lo < hi)) continue;
        const std::size_t nl = pos + 1;
        const std::size_t nr = n - nl;
        if (nl < config.min_samples_leaf || nr < config.min_samples_leaf) continue;
        const double threshold = lo + (hi - lo) / 2.0;
        if (!(lo < threshold && threshold < hi)) continue;
        const double nn = static_cast<double>(n);
        const double gain = nodes[id].impurity - (static_cast<double>(nl) / nn) * gini(left_counts, nl) -
                            (static_cast<double>(nr) / nn) * gini(right_counts, nr);
        const detail::SplitChoice cand{static_cast<int>(f), threshold, gain};
        if (detail::better_split(cand, best)) best = cand;
      }
    }
    if (best.feature < 0 || !(best.gain > kGainTolerance)) continue;

    std::vector<std::size_t> left, right;
    for (auto i : s) (rows[i][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(i);
    nodes[id].feature = best.feature;
    nodes[id].threshold = best.threshold;
    const auto l = make_node(left);
    const auto r = make_node(right);
    nodes[id].left = static_cast<int>(l);
    nodes[id].right = static_cast<int>(r);
    stack.push_back({r, std::move(right)});
    stack.push_back({l, std::move(left)});
  }
  return DecisionTree(std::move(nodes), n_classes);
}

class RandomForest {
public:
  RandomForest() = default;
  RandomForest(std::vector<std::string> classes, std::size_t n_features, ForestConfig config,
               std::vector<DecisionTree> trees)
      : classes_(std::move(classes)), n_features_(n_features), config_(config), trees_(std::move(trees)) {}

  /// Mean of the trees' leaf distributions.
  std::vector<double> predict_proba(std::span<const double> x) const {
    if (x.size() != n_features_) throw Error("RandomForest: feature count mismatch");
    std::vector<double> p(classes_.size(), 0.0);
    for (const auto& t : trees_) {
      const auto& leaf = t.predict_proba(x);
      for (std::size_t k = 0; k < p.size(); ++k) p[k] += leaf[k];
    }
    for (auto& v : p) v /= static_cast<double>(trees_.size());
    return p;
  }

  /// Ties go to the lexicographically smallest class (classes are sorted).
  const std::string& predict(std::span<const double> x) const {
    const auto p = predict_proba(x);
    return classes_[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
  }

  /// Mean decrease in impurity: per tree, each split adds
  /// (n_node / n_root) * (impurity decrease) to its feature; trees are
  /// averaged and the result normalized to sum to one.
  std::vector<double> feature_importance() const {
    std::vector<double> imp(n_features_, 0.0);
    for (const auto& t : trees_) {
      const auto& nodes = t.nodes();
      const double root_n = static_cast<double>(nodes.front().samples);
      for (const auto& n : nodes) {
        if (n.is_leaf()) continue;
        const auto& l = nodes[static_cast<std::size_t>(n.left)];
        const auto& r = nodes[static_cast<std::size_t>(n.right)];
        const double nn = static_cast<double>(n.samples);
        const double decrease = n.impurity - (static_cast<double>(l.samples) / nn) * l.impurity -
                                (static_cast<double>(r.samples) / nn) * r.impurity;
        imp[static_cast<std::size_t>(n.feature)] += (nn / root_n) * decrease;
      }
    }
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total > 0.0)
      for (auto& v : imp) v /= total;
    return imp;
  }

  const std::vector<std::string>& classes() const noexcept { return classes_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  const ForestConfig& config() const noexcept { return config_; }
  std::size_t n_features() const noexcept { return n_features_; }

private:
  std::vector<std::string> classes_;
  std::size_t n_features_ = 0;
  ForestConfig config_;
  std::vector<DecisionTree> trees_;
};

/// Each tree draws its bootstrap sample and feature subsets from its own
/// (seed, tree index) stream, so the forest is identical for any `jobs`.
inline RandomForest fit_forest(std::span<const std::vector<double>> rows, std::span<const std::string> labels,
                               const ForestConfig& config) {
  config.validate();
  if (rows.empty()) throw Error("fit_forest: no training rows");
  if (rows.size() != labels.size()) throw Error("fit_forest: rows and labels differ in length");
  const auto classes = class_list(labels);
  std::vector<std::size_t> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    y[i] = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());
  const std::size_t d = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != d) throw Error("fit_forest: ragged rows");
  config.features_per_split(d);

  std::vector<DecisionTree> trees(config.n_trees);
  parallel_for(config.n_trees, config.jobs, [&](std::size_t t) {
    Rng rng(derive_seed(config.seed, t));
    std::vector<std::size_t> sample(rows.size());
    if (config.bootstrap) {
      for (auto& s : sample) s = uniform_index(rng, rows.size());
    } else {
      std::iota(sample.begin(), sample.end(), 0);
    }
    trees[t] = fit_tree(rows, y, classes.size(), std::move(sample), config, rng);
  });
  return RandomForest(classes, d, config, std::move(trees));
}

inline EvalResult evaluate(const RandomForest& forest, std::span<const std::vector<double>> rows,
                           std::span<const std::string> labels, std::span<const std::size_t> test) {
  std::vector<std::string> truth, predicted;
  for (auto i : test) {
    truth.push_back(labels[i]);
    predicted.push_back(forest.predict(rows[i]));
  }
  auto classes = forest.classes();
  classes.insert(classes.end(), truth.begin(), truth.end());
  return evaluate_predictions(class_list(classes), truth, predicted);
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json to_json(const ForestConfig& c) {
  nlohmann::json j = {{"nTrees", c.n_trees},
                      {"bootstrap", c.bootstrap},
                      {"minSamplesLeaf", c.min_samples_leaf},
                      {"seed", c.seed}};
  j["maxFeatures"] = c.max_features ? nlohmann::json(*c.max_features) : nlohmann::json(nullptr);
  return j;
}

inline ForestConfig forest_config_from_json(const nlohmann::json& j) {
  ForestConfig c;
  c.n_trees = j.value("nTrees", c.n_trees);
  c.bootstrap = j.value("bootstrap", c.bootstrap);
  c.min_samples_leaf = j.value("minSamplesLeaf", c.min_samples_leaf);
  c.seed = j.value("seed", c.seed);
  if (j.contains("maxFeatures") && !j["maxFeatures"].is_null()) c.max_features = j["maxFeatures"].get<std::size_t>();
  return c;
}

inline nlohmann::json to_json(const RandomForest& f) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : f.trees()) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes()) {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"samples", n.samples},
                       {"impurity", n.impurity},
                       {"proba", n.proba}});
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  return {{"config", to_json(f.config())},
          {"classes", f.classes()},
          {"nFeatures", f.n_features()},
          {"trees", std::move(trees)}};
}

inline RandomForest forest_from_json(const nlohmann::json& j) {
  auto classes = j.at("classes").get<std::vector<std::string>>();
  std::vector<DecisionTree> trees;
  for (const auto& t : j.at("trees")) {
    std::vector<TreeNode> nodes;
    for (const auto& n : t.at("nodes")) {
      TreeNode node;
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
      node.samples = n.at("samples").get<std::size_t>();
      node.impurity = n.at("impurity").get<double>();
      node.proba = n.at("proba").get<std::vector<double>>();
      nodes.push_back(std::move(node));
    }
    trees.emplace_back(std::move(nodes), classes.size());
  }
  return RandomForest(std::move(classes), j.at("nFeatures").get<std::size_t>(),
                      forest_config_from_json(j.at("config")), std::move(trees));
}

/// "feature,importance" rows sorted by descending importance (ties by name).
inline void write_importance_csv(std::ostream& os, std::span<const double> importance,
                                 std::span<const std::string> feature_names) {
  std::vector<std::size_t> order(importance.size());
  std::iota(order.begin(), order.end(), 0);
  auto name = [&](std::size_t i) { return i < feature_names.size() ? feature_names[i] : std::to_string(i); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (importance[a] != importance[b]) return importance[a] > importance[b];
    return name(a) < name(b);
  });
  os << "feature,importance\n";
  for (auto i : order) os << csv_escape(name(i)) << ',' << importance[i] << '\n';
}

}  // namespace jsonbag
