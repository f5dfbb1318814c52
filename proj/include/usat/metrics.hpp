#pragma once

// Point metrics. An undefined value (constant input, empty class) is returned
// as NaN and explained through the optional diagnostics sink, never replaced
// by a silent 0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "usat/errors.hpp"

namespace usat {

using Diagnostics = std::vector<std::string>;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

namespace detail {
inline void note(Diagnostics* diag, std::string message) {
  if (diag) diag->push_back(std::move(message));
}

inline void check_same_length(std::size_t a, std::size_t b) {
  if (a != b) throw DataError("metric inputs differ in length (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}
}  // namespace detail

inline double pearson(std::span<const double> a, std::span<const double> b, Diagnostics* diag = nullptr) {
  detail::check_same_length(a.size(), b.size());
  const std::size_t n = a.size();
  if (n < 2) {
    detail::note(diag, "pearson: need at least 2 pairs");
    return kNaN;
  }
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    detail::note(diag, "pearson: undefined for a constant vector");
    return kNaN;
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// 1-based ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> a, std::span<const double> b, Diagnostics* diag = nullptr) {
  detail::check_same_length(a.size(), b.size());
  const auto ra = average_ranks(a), rb = average_ranks(b);
  return pearson(ra, rb, diag);
}

/// (p_o - p_e) / (1 - p_e) over categorical labels; NaN when p_e = 1.
template <class Label>
double cohen_kappa(std::span<const Label> a, std::span<const Label> b, Diagnostics* diag = nullptr) {
  detail::check_same_length(a.size(), b.size());
  const double n = static_cast<double>(a.size());
  if (a.empty()) {
    detail::note(diag, "cohen_kappa: no items");
    return kNaN;
  }
  std::map<Label, double> ca, cb;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [label, count] : ca) {
    auto it = cb.find(label);
    if (it != cb.end()) p_e += (count / n) * (it->second / n);
  }
  if (p_e >= 1.0) {
    detail::note(diag, "cohen_kappa: undefined when both raters use one identical label");
    return kNaN;
  }
  return (p_o - p_e) / (1.0 - p_e);
}

enum class Satisfaction { satisfactory, dissatisfactory };

/// Dissatisfactory iff rating < 3.
inline Satisfaction binarize(double rating) {
  return rating < 3.0 ? Satisfaction::dissatisfactory : Satisfaction::satisfactory;
}

/// F1 of the dissatisfactory class. 0, with a diagnostic, when either side
/// has no dissatisfactory instance.
inline double f_dissatisfactory(std::span<const double> truth, std::span<const double> predicted,
                                Diagnostics* diag = nullptr) {
  detail::check_same_length(truth.size(), predicted.size());
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = binarize(truth[i]) == Satisfaction::dissatisfactory;
    const bool p = binarize(predicted[i]) == Satisfaction::dissatisfactory;
    tp += t && p;
    fp += !t && p;
    fn += t && !p;
  }
  if (tp + fn == 0 || tp + fp == 0) {
    detail::note(diag, tp + fn == 0 ? "f_dissatisfactory: no true dissatisfactory instances"
                                    : "f_dissatisfactory: no predicted dissatisfactory instances");
    return 0.0;
  }
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

inline double binary_accuracy(std::span<const double> truth, std::span<const double> predicted,
                              Diagnostics* diag = nullptr) {
  detail::check_same_length(truth.size(), predicted.size());
  if (truth.empty()) {
    detail::note(diag, "binary_accuracy: no items");
    return kNaN;
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += binarize(truth[i]) == binarize(predicted[i]);
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

enum class Metric { pearson, spearman, f_dissatisfactory, accuracy };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::pearson: return "correlation";
    case Metric::spearman: return "spearman";
    case Metric::f_dissatisfactory: return "f_dissatisfactory";
    case Metric::accuracy: return "accuracy";
  }
  return "?";
}

inline double compute_metric(Metric m, std::span<const double> truth, std::span<const double> predicted,
                             Diagnostics* diag = nullptr) {
  switch (m) {
    case Metric::pearson: return pearson(truth, predicted, diag);
    case Metric::spearman: return spearman(truth, predicted, diag);
    case Metric::f_dissatisfactory: return f_dissatisfactory(truth, predicted, diag);
    case Metric::accuracy: return binary_accuracy(truth, predicted, diag);
  }
  return kNaN;
}

}  // namespace usat
