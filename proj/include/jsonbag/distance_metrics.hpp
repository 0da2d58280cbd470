#pragma once

// Divergences and distances between discrete distributions. Distributions are
// sorted maps from outcome to probability; two distributions live on the
// union of their keys with missing entries read as zero. All logarithms are
// base 2, which bounds the Jensen-Shannon divergence by 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>

#include "jsonbag/bag_model.hpp"
#include "jsonbag/common.hpp"

namespace jsonbag {

template <class Key>
using Distribution = std::map<Key, double>;

namespace detail {

/// Calls fn(p_x, q_x) for every key in the union, in ascending key order.
template <class Key, class Fn>
void for_each_aligned(const std::map<Key, double>& p, const std::map<Key, double>& q, Fn&& fn) {
  auto a = p.begin();
  auto b = q.begin();
  while (a != p.end() || b != q.end()) {
    if (b == q.end() || (a != p.end() && a->first < b->first)) {
      fn(a->second, 0.0);
      ++a;
    } else if (a == p.end() || b->first < a->first) {
      fn(0.0, b->second);
      ++b;
    } else {
      fn(a->second, b->second);
      ++a;
      ++b;
    }
  }
}

inline double xlog2_ratio(double a, double b) { return a * std::log2(a / b); }

}  // namespace detail

/// KL(p||q) in bits. +inf when p puts mass where q has none.
template <class Key>
double kl_divergence(const std::map<Key, double>& p, const std::map<Key, double>& q) {
  double sum = 0.0;
  bool infinite = false;
  detail::for_each_aligned(p, q, [&](double px, double qx) {
    if (px <= 0.0) return;
    if (qx <= 0.0) {
      infinite = true;
      return;
    }
    sum += detail::xlog2_ratio(px, qx);
  });
  return infinite ? std::numeric_limits<double>::infinity() : sum;
}

/// ½·KL(p||m) + ½·KL(q||m) with m = ½(p+q). Each per-outcome term is
/// symmetric in (p, q) and terms are summed in key order, so swapping the
/// arguments gives a bit-identical result.
template <class Key>
double js_divergence(const std::map<Key, double>& p, const std::map<Key, double>& q) {
  double sum = 0.0;
  bool overlap = false;
  detail::for_each_aligned(p, q, [&](double px, double qx) {
    if (px > 0.0 && qx > 0.0) {
      overlap = true;
      const double m = 0.5 * (px + qx);
      sum += detail::xlog2_ratio(px, m) + detail::xlog2_ratio(qx, m);
    } else {
      // p·log2(p / (p/2)) = p
      sum += px + qx;
    }
  });
  if (!overlap && !(p.empty() && q.empty())) return 1.0;
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

template <class Key>
double js_distance(const std::map<Key, double>& p, const std::map<Key, double>& q) {
  return std::sqrt(js_divergence(p, q));
}

inline double kl_divergence(const NormalizedBag& p, const NormalizedBag& q) { return kl_divergence(p.freqs, q.freqs); }
inline double js_divergence(const NormalizedBag& p, const NormalizedBag& q) { return js_divergence(p.freqs, q.freqs); }
inline double js_distance(const NormalizedBag& p, const NormalizedBag& q) { return js_distance(p.freqs, q.freqs); }

/// Cosine similarity; 0 when either vector is all zeros.
inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error("cosine_similarity: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

inline double euclidean_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error("euclidean_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace jsonbag
