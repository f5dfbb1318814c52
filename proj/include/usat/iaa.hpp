#pragma once

// Inter-annotator agreement: mean pairwise Spearman rho on co-annotated
// ratings, and pairwise Cohen's kappa on categorical marks.

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "usat/corpus.hpp"
#include "usat/metrics.hpp"

namespace usat {

struct PairAgreement {
  std::string annotator_a;
  std::string annotator_b;
  std::size_t n_items = 0;
  double value = kNaN;
};

struct IaaReport {
  std::string statistic;
  double mean = kNaN;  // over pairs with a defined value
  std::vector<PairAgreement> pairs;
  Diagnostics diagnostics;

  bool defined() const { return !std::isnan(mean); }
};

namespace detail {

/// item -> annotator -> value, both ordered.
template <class V>
using ItemTable = std::map<std::string, std::map<std::string, V>>;

template <class V, class Stat>
IaaReport pairwise(const ItemTable<V>& items, std::string statistic, Stat stat) {
  IaaReport report;
  report.statistic = std::move(statistic);
  std::set<std::string> annotators;
  for (const auto& [item, by] : items)
    for (const auto& [a, v] : by) annotators.insert(a);
  const std::vector<std::string> ids(annotators.begin(), annotators.end());
  double total = 0.0;
  std::size_t defined = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      std::vector<V> a, b;
      for (const auto& [item, by] : items) {
        auto ia = by.find(ids[i]), ib = by.find(ids[j]);
        if (ia != by.end() && ib != by.end()) {
          a.push_back(ia->second);
          b.push_back(ib->second);
        }
      }
      const std::string pair = ids[i] + "/" + ids[j];
      if (a.size() < 2) {
        report.diagnostics.push_back(pair + ": fewer than 2 co-annotated items, skipped");
        continue;
      }
      Diagnostics d;
      const double v = stat(std::span<const V>(a), std::span<const V>(b), &d);
      for (auto& m : d) report.diagnostics.push_back(pair + ": " + m);
      report.pairs.push_back({ids[i], ids[j], a.size(), v});
      if (!std::isnan(v)) {
        total += v;
        ++defined;
      }
    }
  }
  if (defined > 0) report.mean = total / static_cast<double>(defined);
  else report.diagnostics.push_back(report.statistic + ": no annotator pair with a defined value");
  return report;
}

}  // namespace detail

/// Mean pairwise Spearman rho over annotator pairs on co-annotated turns.
inline IaaReport iaa_spearman(std::span<const TurnAnnotation> annotations) {
  detail::ItemTable<double> items;
  for (const auto& a : annotations)
    items[a.dialogue_id + "#" + std::to_string(a.turn_index)][a.annotator_id] = a.rq_rating;
  return detail::pairwise<double>(items, "spearman",
                                  [](std::span<const double> a, std::span<const double> b, Diagnostics* d) {
                                    return spearman(a, b, d);
                                  });
}

/// A categorical mark on an item, e.g. "a new interaction starts at this turn".
struct BoundaryMark {
  std::string item_id;
  std::string annotator_id;
  int label = 0;
};

inline IaaReport iaa_kappa(std::span<const BoundaryMark> marks) {
  detail::ItemTable<int> items;
  for (const auto& m : marks) items[m.item_id][m.annotator_id] = m.label;
  return detail::pairwise<int>(items, "cohen_kappa",
                               [](std::span<const int> a, std::span<const int> b, Diagnostics* d) {
                                 return cohen_kappa<int>(a, b, d);
                               });
}

struct RatingCorrelation {
  std::size_t n_items = 0;
  double pearson = kNaN;
  double spearman = kNaN;
  Diagnostics diagnostics;
};

/// Correlation between averaged annotator ratings and user-provided ratings
/// on the turns both cover.
inline RatingCorrelation annotation_user_correlation(const std::map<TurnKey, double>& mean_annotations,
                                                     const std::map<TurnKey, double>& user_ratings) {
  RatingCorrelation rc;
  std::vector<double> a, b;
  for (const auto& [key, v] : mean_annotations) {
    auto it = user_ratings.find(key);
    if (it == user_ratings.end()) continue;
    a.push_back(v);
    b.push_back(it->second);
  }
  rc.n_items = a.size();
  rc.pearson = pearson(a, b, &rc.diagnostics);
  rc.spearman = spearman(a, b, &rc.diagnostics);
  return rc;
}

}  // namespace usat
