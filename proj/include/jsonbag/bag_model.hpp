#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "jsonbag/common.hpp"
#include "jsonbag/json_tokenizer.hpp"

namespace jsonbag {

/// Raw token occurrence counts. Counts are reals so that averaged bags share
/// the type; absent tokens are implicitly zero and never stored.
struct JsonBag {
  std::map<Token, double> counts;
  double total = 0.0;

  friend bool operator==(const JsonBag&, const JsonBag&) = default;
};

/// A bag whose frequencies sum to one: a distribution over tokens.
struct NormalizedBag {
  std::map<Token, double> freqs;

  double sum() const {
    double s = 0.0;
    for (const auto& [_, f] : freqs) s += f;
    return s;
  }
  std::size_t size() const noexcept { return freqs.size(); }

  friend bool operator==(const NormalizedBag&, const NormalizedBag&) = default;
};

struct Prototype {
  std::string label;
  NormalizedBag bag;
  std::size_t support = 0;
};

/// Rows aligned to a shared vocabulary.
struct FeatureMatrix {
  std::vector<Token> vocabulary;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  /// Rows that had no token in the vocabulary and so came out all-zero.
  std::size_t rows_without_known_tokens = 0;
};

inline JsonBag build_bag(std::span<const Token> tokens) {
  if (tokens.empty()) throw Error("build_bag: empty token list");
  JsonBag bag;
  for (const auto& t : tokens) bag.counts[t] += 1.0;
  bag.total = static_cast<double>(tokens.size());
  return bag;
}

inline NormalizedBag normalize(const JsonBag& bag) {
  if (!(bag.total > 0.0)) throw Error("normalize: bag total is zero");
  NormalizedBag out;
  for (const auto& [t, c] : bag.counts) out.freqs.emplace_hint(out.freqs.end(), t, c / bag.total);
  return out;
}

namespace detail {

/// Running mean over sorted values: order-independent, and exact when all
/// values are equal.
inline double stable_mean(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double mean = 0.0;
  double k = 0.0;
  for (double v : values) {
    k += 1.0;
    mean += (v - mean) / k;
  }
  return mean;
}

}  // namespace detail

enum class PrototypeAveraging {
  MeanOfNormalized,  ///< each trajectory weighs the same (default)
  PooledCounts,      ///< long trajectories weigh more
};

/// Per-token mean of normalized bags; tokens absent from a bag count as 0.
inline Prototype prototype(std::span<const NormalizedBag> bags, std::string label) {
  if (bags.empty()) throw Error("prototype: no bags for class '" + label + "'");
  std::set<Token> vocab;
  for (const auto& b : bags)
    for (const auto& [t, _] : b.freqs) vocab.insert(t);
  Prototype p{std::move(label), {}, bags.size()};
  std::vector<double> values;
  values.reserve(bags.size());
  for (const auto& t : vocab) {
    values.clear();
    for (const auto& b : bags) {
      const auto it = b.freqs.find(t);
      values.push_back(it == b.freqs.end() ? 0.0 : it->second);
    }
    const double mean = detail::stable_mean(values);
    if (mean > 0.0) p.bag.freqs.emplace_hint(p.bag.freqs.end(), t, mean);
  }
  return p;
}

/// Alternative prototype: normalize the pooled raw counts of all bags.
inline Prototype prototype_pooled(std::span<const JsonBag> bags, std::string label) {
  if (bags.empty()) throw Error("prototype_pooled: no bags for class '" + label + "'");
  JsonBag pooled;
  for (const auto& b : bags) {
    for (const auto& [t, c] : b.counts) pooled.counts[t] += c;
    pooled.total += b.total;
  }
  return {std::move(label), normalize(pooled), bags.size()};
}

/// Min-max scaling fitted on training rows only. Constant columns map to 0 and
/// values outside the fitted range are clamped to [0, 1].
class MinMaxScaler {
public:
  void fit(std::span<const std::vector<double>> rows) {
    if (rows.size() < 2) throw Error("minmax_scale: need at least 2 rows to fit");
    const auto d = rows.front().size();
    min_.assign(d, 0.0);
    max_.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      min_[j] = max_[j] = rows.front()[j];
    }
    for (const auto& r : rows) {
      if (r.size() != d) throw Error("minmax_scale: ragged rows");
      for (std::size_t j = 0; j < d; ++j) {
        min_[j] = std::min(min_[j], r[j]);
        max_[j] = std::max(max_[j], r[j]);
      }
    }
  }

  std::vector<double> transform(std::span<const double> row) const {
    if (row.size() != min_.size()) throw Error("minmax_scale: row length does not match fitted width");
    std::vector<double> out(row.size(), 0.0);
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double range = max_[j] - min_[j];
      if (range > 0.0) out[j] = std::clamp((row[j] - min_[j]) / range, 0.0, 1.0);
    }
    return out;
  }

  void transform_in_place(FeatureMatrix& m) const {
    for (auto& r : m.rows) r = transform(r);
  }

  const std::vector<double>& mins() const noexcept { return min_; }
  const std::vector<double>& maxs() const noexcept { return max_; }

private:
  std::vector<double> min_;
  std::vector<double> max_;
};

/// Union of token sets, sorted lexicographically.
inline std::vector<Token> build_vocabulary(std::span<const NormalizedBag> bags) {
  std::set<Token> vocab;
  for (const auto& b : bags)
    for (const auto& [t, _] : b.freqs) vocab.insert(t);
  return {vocab.begin(), vocab.end()};
}

/// Rows of normalized frequencies over `vocabulary`; tokens outside the
/// vocabulary are dropped.
inline FeatureMatrix export_matrix(std::span<const NormalizedBag> bags, std::vector<Token> vocabulary,
                                   std::vector<std::string> labels = {}) {
  FeatureMatrix m;
  m.vocabulary = std::move(vocabulary);
  m.labels = std::move(labels);
  m.rows.reserve(bags.size());
  for (const auto& b : bags) {
    std::vector<double> row(m.vocabulary.size(), 0.0);
    bool any = false;
    // Both sides are sorted, so a merge walk aligns them.
    auto it = b.freqs.begin();
    for (std::size_t j = 0; j < m.vocabulary.size() && it != b.freqs.end(); ++j) {
      while (it != b.freqs.end() && it->first < m.vocabulary[j]) ++it;
      if (it != b.freqs.end() && it->first == m.vocabulary[j]) {
        row[j] = it->second;
        any = true;
      }
    }
    if (!any) ++m.rows_without_known_tokens;
    m.rows.push_back(std::move(row));
  }
  return m;
}

/// Vocabulary taken from the bags themselves.
inline FeatureMatrix export_matrix(std::span<const NormalizedBag> bags) {
  return export_matrix(bags, build_vocabulary(bags));
}

/// Fits a scaler on `train` and returns the scaled copy.
inline FeatureMatrix minmax_scale(const FeatureMatrix& train, MinMaxScaler* fitted = nullptr) {
  MinMaxScaler scaler;
  scaler.fit(train.rows);
  FeatureMatrix out = train;
  scaler.transform_in_place(out);
  if (fitted) *fitted = std::move(scaler);
  return out;
}

// Persistence: {"counts": {token: n}, "total": n}; prototypes add "label"
// and "support".

inline nlohmann::json to_json(const JsonBag& bag) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [t, c] : bag.counts) counts[t] = c;
  return {{"counts", std::move(counts)}, {"total", bag.total}};
}

inline nlohmann::json to_json(const Prototype& p) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [t, f] : p.bag.freqs) counts[t] = f;
  return {{"counts", std::move(counts)}, {"total", 1.0}, {"label", p.label}, {"support", p.support}};
}

inline JsonBag bag_from_json(const nlohmann::json& j) {
  JsonBag bag;
  for (const auto& [t, c] : j.at("counts").items()) {
    const double v = c.get<double>();
    if (v < 0.0) throw Error("bag_from_json: negative count for '" + t + "'");
    if (v > 0.0) bag.counts.emplace(t, v);
  }
  bag.total = j.at("total").get<double>();
  return bag;
}

inline Prototype prototype_from_json(const nlohmann::json& j) {
  Prototype p;
  p.label = j.at("label").get<std::string>();
  p.support = j.at("support").get<std::size_t>();
  p.bag = normalize(bag_from_json(j));
  return p;
}

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Header is "label" followed by the vocabulary.
inline void write_csv(std::ostream& os, const FeatureMatrix& m) {
  os << "label";
  for (const auto& t : m.vocabulary) os << ',' << csv_escape(t);
  os << '\n';
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    os << csv_escape(i < m.labels.size() ? m.labels[i] : std::string());
    for (double v : m.rows[i]) os << ',' << v;
    os << '\n';
  }
}

}  // namespace jsonbag
