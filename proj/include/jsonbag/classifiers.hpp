#pragma once

// Prototype-based nearest-neighbour search (P-NNS) and its evaluation
// harness: stratified splits, confusion matrices, Wilson intervals and the
// N-shot protocol.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jsonbag/bag_model.hpp"
#include "jsonbag/common.hpp"
#include "jsonbag/distance_metrics.hpp"

namespace jsonbag {

enum class Metric { Jsd, Cosine, L2 };

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Jsd: return "jsd";
    case Metric::Cosine: return "cosine";
    case Metric::L2: return "l2";
  }
  return "?";
}

/// Mean feature vector of one class (the vector-space analogue of Prototype).
struct VectorPrototype {
  std::string label;
  std::vector<double> mean;
  std::size_t support = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Sorted distinct labels.
inline std::vector<std::string> class_list(std::span<const std::string> labels) {
  std::vector<std::string> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

/// Per-class shuffle, then the first ceil(n * train_fraction) items of each
/// class go to training. Every class with at least one item trains.
inline Split stratified_split(std::span<const std::string> labels, std::uint64_t seed, double train_fraction = 0.5) {
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Split split;
  std::uint64_t stream = 0;
  for (auto& [label, idx] : by_class) {
    Rng rng(derive_seed(seed, stream++));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::ceil(static_cast<double>(idx.size()) * train_fraction));
    split.train.insert(split.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

/// Items with class labels and a train/test partition.
template <class Item>
struct LabeledDataset {
  std::vector<Item> items;
  std::vector<std::string> labels;
  Split split;
  std::uint64_t seed = 0;

  void validate() const {
    if (items.size() != labels.size()) throw Error("dataset: items and labels differ in length");
    std::vector<char> seen(items.size(), 0);
    for (auto i : split.train) seen.at(i) |= 1;
    for (auto i : split.test) {
      if (seen.at(i) & 1) throw Error("dataset: train and test overlap");
    }
    const auto all = class_list(labels);
    std::vector<std::string> train_labels;
    for (auto i : split.train) train_labels.push_back(labels[i]);
    if (class_list(train_labels) != all) throw Error("dataset: a class has no training item");
  }
};

// ---------------------------------------------------------------------------
// Fitting

struct PnnsModel {
  std::vector<Prototype> prototypes;  // sorted by label
  /// Set when two classes ended up with identical prototypes.
  bool degenerate = false;
};

inline PnnsModel fit_pnns(std::span<const NormalizedBag> bags, std::span<const std::string> labels,
                          std::span<const std::size_t> indices) {
  std::map<std::string, std::vector<NormalizedBag>> groups;
  for (auto i : indices) groups[labels[i]].push_back(bags[i]);
  PnnsModel model;
  for (auto& [label, members] : groups) model.prototypes.push_back(prototype(members, label));
  for (std::size_t a = 0; a < model.prototypes.size(); ++a)
    for (std::size_t b = a + 1; b < model.prototypes.size(); ++b)
      if (model.prototypes[a].bag == model.prototypes[b].bag) model.degenerate = true;
  return model;
}

inline PnnsModel fit_pnns(std::span<const NormalizedBag> bags, std::span<const std::string> labels) {
  std::vector<std::size_t> all(bags.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return fit_pnns(bags, labels, all);
}

inline std::vector<VectorPrototype> fit_vector_prototypes(std::span<const std::vector<double>> rows,
                                                          std::span<const std::string> labels,
                                                          std::span<const std::size_t> indices) {
  std::map<std::string, VectorPrototype> groups;
  for (auto i : indices) {
    auto& p = groups[labels[i]];
    if (p.mean.empty()) {
      p.label = labels[i];
      p.mean.assign(rows[i].size(), 0.0);
    }
    if (rows[i].size() != p.mean.size()) throw Error("fit_vector_prototypes: ragged rows");
    for (std::size_t j = 0; j < p.mean.size(); ++j) p.mean[j] += rows[i][j];
    ++p.support;
  }
  std::vector<VectorPrototype> out;
  for (auto& [_, p] : groups) {
    for (auto& v : p.mean) v /= static_cast<double>(p.support);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification

/// Label of the prototype minimizing `distance`. Prototypes are scanned in
/// label order with a strict comparison, so ties go to the smallest label.
template <class Proto, class DistanceFn>
const std::string& nearest_label(std::span<const Proto> prototypes, DistanceFn&& distance) {
  if (prototypes.empty()) throw Error("classify: no prototypes");
  std::size_t best = 0;
  double best_d = distance(prototypes[0]);
  for (std::size_t k = 1; k < prototypes.size(); ++k) {
    const double d = distance(prototypes[k]);
    if (d < best_d || (d == best_d && prototypes[k].label < prototypes[best].label)) {
      best = k;
      best_d = d;
    }
  }
  return prototypes[best].label;
}

inline const std::string& classify(const NormalizedBag& item, std::span<const Prototype> prototypes) {
  return nearest_label(prototypes, [&](const Prototype& p) { return js_distance(item, p.bag); });
}

inline const std::string& classify(std::span<const double> item, std::span<const VectorPrototype> prototypes,
                                   Metric metric) {
  switch (metric) {
    case Metric::L2:
      return nearest_label(prototypes, [&](const VectorPrototype& p) { return euclidean_distance(item, p.mean); });
    case Metric::Cosine:
      // Maximizing similarity is minimizing its negation.
      return nearest_label(prototypes, [&](const VectorPrototype& p) { return -cosine_similarity(item, p.mean); });
    case Metric::Jsd: break;
  }
  throw Error("classify: JSD needs bag prototypes");
}

// ---------------------------------------------------------------------------
// Evaluation

class ConfusionMatrix {
public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> classes)
      : classes_(std::move(classes)), counts_(classes_.size(), std::vector<std::size_t>(classes_.size(), 0)) {}

  void add(const std::string& truth, const std::string& predicted) { ++counts_[index(truth)][index(predicted)]; }

  const std::vector<std::string>& classes() const noexcept { return classes_; }
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth).at(predicted); }
  std::size_t index(const std::string& label) const {
    const auto it = std::lower_bound(classes_.begin(), classes_.end(), label);
    if (it == classes_.end() || *it != label) throw Error("confusion matrix: unknown class '" + label + "'");
    return static_cast<std::size_t>(it - classes_.begin());
  }

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& row : counts_)
      for (auto c : row) t += c;
    return t;
  }
  std::size_t trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < counts_.size(); ++i) t += counts_[i][i];
    return t;
  }
  std::size_t row_sum(std::size_t truth) const {
    std::size_t t = 0;
    for (auto c : counts_.at(truth)) t += c;
    return t;
  }

  /// Rows are true classes, columns predictions.
  void write_csv(std::ostream& os) const {
    os << "true\\predicted";
    for (const auto& c : classes_) os << ',' << csv_escape(c);
    os << '\n';
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      os << csv_escape(classes_[i]);
      for (auto c : counts_[i]) os << ',' << c;
      os << '\n';
    }
  }

private:
  std::vector<std::string> classes_;  // sorted
  std::vector<std::vector<std::size_t>> counts_;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// 95% Wilson score interval for `successes` out of `n`.
inline Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  // The bounds touch 0 and 1 exactly at the extremes; rounding would leave
  // them a hair inside.
  return {successes == 0 ? 0.0 : std::max(0.0, center - half), successes == n ? 1.0 : std::min(1.0, center + half)};
}

struct EvalResult {
  double accuracy = 0.0;
  Interval ci95;
  ConfusionMatrix confusion;
};

inline EvalResult evaluate_predictions(std::vector<std::string> classes, std::span<const std::string> truth,
                                       std::span<const std::string> predicted) {
  if (truth.empty()) throw Error("evaluate: empty test set");
  if (truth.size() != predicted.size()) throw Error("evaluate: truth/prediction length mismatch");
  EvalResult r{0.0, {}, ConfusionMatrix(std::move(classes))};
  for (std::size_t i = 0; i < truth.size(); ++i) r.confusion.add(truth[i], predicted[i]);
  const auto correct = r.confusion.trace();
  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  r.ci95 = wilson_interval(correct, truth.size());
  return r;
}

/// P-NNS with JSD over the test indices of `bags`.
inline EvalResult evaluate(std::span<const NormalizedBag> bags, std::span<const std::string> labels,
                           std::span<const std::size_t> test, std::span<const Prototype> prototypes) {
  std::vector<std::string> truth, predicted;
  std::vector<std::string> classes;
  for (const auto& p : prototypes) classes.push_back(p.label);
  for (auto i : test) {
    truth.push_back(labels[i]);
    predicted.push_back(classify(bags[i], prototypes));
  }
  for (const auto& t : truth) classes.push_back(t);
  return evaluate_predictions(class_list(classes), truth, predicted);
}

inline EvalResult evaluate(std::span<const std::vector<double>> rows, std::span<const std::string> labels,
                           std::span<const std::size_t> test, std::span<const VectorPrototype> prototypes,
                           Metric metric) {
  std::vector<std::string> truth, predicted;
  std::vector<std::string> classes;
  for (const auto& p : prototypes) classes.push_back(p.label);
  for (auto i : test) {
    truth.push_back(labels[i]);
    predicted.push_back(classify(rows[i], prototypes, metric));
  }
  for (const auto& t : truth) classes.push_back(t);
  return evaluate_predictions(class_list(classes), truth, predicted);
}

// ---------------------------------------------------------------------------
// N-shot

struct NShotRow {
  std::size_t n = 0;
  double mean_accuracy = 0.0;
  double min_accuracy = 0.0;
  double max_accuracy = 0.0;
  std::size_t trials = 0;
};

/// Generic N-shot protocol. For every N and trial, N items per class are
/// drawn without replacement to fit; all other items form the test set.
/// `fit_and_score(train, test)` returns the accuracy on `test`. Each trial
/// draws from its own (seed, N, trial) stream, so results do not depend on
/// `jobs`.
template <class FitAndScore>
std::vector<NShotRow> n_shot_protocol(std::span<const std::string> labels, std::span<const std::size_t> n_values,
                                      std::size_t trials, std::uint64_t seed, std::size_t jobs,
                                      FitAndScore&& fit_and_score) {
  if (trials == 0) throw Error("n_shot_eval: trials must be positive");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (auto n : n_values) {
    if (n == 0) throw Error("n_shot_eval: N must be positive");
    for (const auto& [label, idx] : by_class) {
      if (idx.size() <= n) {
        throw Error("n_shot_eval: class '" + label + "' has " + std::to_string(idx.size()) +
                    " items, needs more than " + std::to_string(n));
      }
    }
  }
  std::vector<NShotRow> rows;
  for (auto n : n_values) {
    std::vector<double> acc(trials, 0.0);
    parallel_for(trials, jobs, [&](std::size_t trial) {
      Rng rng(derive_seed(seed, n, trial));
      std::vector<char> in_train(labels.size(), 0);
      Split split;
      for (const auto& [label, idx] : by_class) {
        auto shuffled = idx;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (std::size_t k = 0; k < n; ++k) in_train[shuffled[k]] = 1;
      }
      for (std::size_t i = 0; i < labels.size(); ++i) (in_train[i] ? split.train : split.test).push_back(i);
      acc[trial] = fit_and_score(split.train, split.test);
    });
    NShotRow row{n, 0.0, acc[0], acc[0], trials};
    double sum = 0.0;
    for (double a : acc) {
      sum += a;
      row.min_accuracy = std::min(row.min_accuracy, a);
      row.max_accuracy = std::max(row.max_accuracy, a);
    }
    row.mean_accuracy = sum / static_cast<double>(trials);
    rows.push_back(row);
  }
  return rows;
}

/// N-shot P-NNS with JSD on normalized bags.
inline std::vector<NShotRow> n_shot_eval(std::span<const NormalizedBag> bags, std::span<const std::string> labels,
                                         std::span<const std::size_t> n_values, std::size_t trials,
                                         std::uint64_t seed, std::size_t jobs = 1) {
  return n_shot_protocol(labels, n_values, trials, seed, jobs,
                         [&](const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) {
                           const auto model = fit_pnns(bags, labels, train);
                           return evaluate(bags, labels, test, model.prototypes).accuracy;
                         });
}

}  // namespace jsonbag
