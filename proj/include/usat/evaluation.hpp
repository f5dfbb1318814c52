#pragma once

// Bootstrap confidence intervals, k-fold cross-validation and the
// feature-set ablation harness.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "usat/dataset.hpp"
#include "usat/metrics.hpp"
#include "usat/model.hpp"
#include "usat/rng.hpp"

namespace usat {

struct MetricReport {
  std::string metric;
  double point = kNaN;
  double ci_low = kNaN;
  double ci_high = kNaN;
  int n_resamples = 0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t n_undefined = 0;  // resamples on which the metric was undefined
  bool valid = false;
  std::string diagnostic;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

struct BootstrapOptions {
  int n_resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

namespace detail {
/// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}
}  // namespace detail

/// Percentile bootstrap over (truth, prediction) pairs. The point estimate is
/// the metric on the full sample; the interval is widened to contain it when
/// resampling skew would exclude it. The report is invalid when the point
/// estimate or at least half of the resamples are undefined.
inline MetricReport bootstrap_ci(Metric metric, std::span<const double> truth, std::span<const double> predicted,
                                 const BootstrapOptions& opt = {}) {
  detail::check_same_length(truth.size(), predicted.size());
  if (opt.n_resamples < 1) throw ConfigError("n_resamples must be >= 1");
  if (!(opt.level > 0.0 && opt.level < 1.0)) throw ConfigError("confidence level must be in (0,1)");
  MetricReport r;
  r.metric = to_string(metric);
  r.n_resamples = opt.n_resamples;
  r.seed = opt.seed;
  r.n = truth.size();
  Diagnostics diag;
  r.point = compute_metric(metric, truth, predicted, &diag);
  if (std::isnan(r.point) || truth.empty()) {
    r.diagnostic = diag.empty() ? "metric undefined on the full sample" : diag.front();
    return r;
  }
  Rng rng(opt.seed);
  const std::size_t n = truth.size();
  std::vector<double> t(n), p(n), values;
  values.reserve(static_cast<std::size_t>(opt.n_resamples));
  for (int b = 0; b < opt.n_resamples; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(rng.index(n));
      t[i] = truth[j];
      p[i] = predicted[j];
    }
    const double v = compute_metric(metric, t, p);
    if (std::isnan(v)) ++r.n_undefined;
    else values.push_back(v);
  }
  if (2 * r.n_undefined >= static_cast<std::size_t>(opt.n_resamples)) {
    r.diagnostic = "metric undefined on " + std::to_string(r.n_undefined) + " of " +
                   std::to_string(opt.n_resamples) + " resamples";
    return r;
  }
  std::sort(values.begin(), values.end());
  const double tail = (1.0 - opt.level) / 2.0;
  r.ci_low = std::min(detail::quantile_sorted(values, tail), r.point);
  r.ci_high = std::max(detail::quantile_sorted(values, 1.0 - tail), r.point);
  r.valid = true;
  if (!diag.empty()) r.diagnostic = diag.front();
  return r;
}

struct CvOptions {
  int k = 9;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
  std::vector<Metric> metrics = {Metric::pearson, Metric::f_dissatisfactory, Metric::accuracy};
  BootstrapOptions bootstrap;
};

struct CvResult {
  std::vector<std::size_t> holdout_rows;
  std::vector<std::size_t> cv_rows;
  std::vector<std::vector<std::size_t>> folds;           // row indices into the input matrix
  std::vector<std::map<std::string, double>> fold_metrics;  // point estimates per fold
  std::vector<double> oof_predictions;                   // aligned with cv_rows
  std::vector<MetricReport> pooled;                      // on out-of-fold predictions
  std::vector<MetricReport> holdout;                     // final model on the held-out rows
};

using FitFunction = std::function<TrainedModel(const FeatureMatrix&)>;

/// Reserves holdout_fraction of rows as a test set, runs k-fold CV on the
/// rest, then refits on all CV rows and evaluates on the holdout. Rows are
/// shuffled with `seed`; fold f takes shuffled positions i with i % k == f.
inline CvResult kfold_cv(const FeatureMatrix& data, const FitFunction& fit, const CvOptions& opt) {
  if (!data.labeled()) throw DataError("cross-validation needs labeled rows");
  if (opt.k < 2) throw ConfigError("k must be >= 2");
  if (!(opt.holdout_fraction >= 0.0 && opt.holdout_fraction < 1.0))
    throw ConfigError("holdout_fraction must be in [0,1)");
  const std::size_t n = data.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(opt.seed);
  rng.shuffle(order);
  const auto n_hold = static_cast<std::size_t>(std::floor(opt.holdout_fraction * static_cast<double>(n) + 1e-9));

  CvResult res;
  res.holdout_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  res.cv_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
  const auto k = static_cast<std::size_t>(opt.k);
  if (res.cv_rows.size() < k)
    throw DataError("cross-validation set has " + std::to_string(res.cv_rows.size()) + " rows, fewer than k = " +
                    std::to_string(k));
  res.folds.resize(k);
  for (std::size_t i = 0; i < res.cv_rows.size(); ++i) res.folds[i % k].push_back(res.cv_rows[i]);

  std::map<std::size_t, double> oof;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_rows;
    for (std::size_t g = 0; g < k; ++g)
      if (g != f) train_rows.insert(train_rows.end(), res.folds[g].begin(), res.folds[g].end());
    const auto model = fit(data.select_rows(train_rows));
    const auto test = data.select_rows(res.folds[f]);
    const auto pred = model.predict(test);
    std::map<std::string, double> fm;
    for (auto m : opt.metrics) fm[to_string(m)] = compute_metric(m, test.y, pred);
    res.fold_metrics.push_back(std::move(fm));
    for (std::size_t i = 0; i < res.folds[f].size(); ++i) oof[res.folds[f][i]] = pred[i];
  }
  std::vector<double> truth;
  for (auto r : res.cv_rows) {
    res.oof_predictions.push_back(oof.at(r));
    truth.push_back(data.y[r]);
  }
  for (auto m : opt.metrics) res.pooled.push_back(bootstrap_ci(m, truth, res.oof_predictions, opt.bootstrap));

  if (!res.holdout_rows.empty()) {
    const auto model = fit(data.select_rows(res.cv_rows));
    const auto test = data.select_rows(res.holdout_rows);
    const auto pred = model.predict(test);
    for (auto m : opt.metrics) res.holdout.push_back(bootstrap_ci(m, test.y, pred, opt.bootstrap));
  }
  return res;
}

/// Named groups of test rows (e.g. single-turn, multi-turn, held-out application).
using RowPartitions = std::vector<std::pair<std::string, std::vector<std::size_t>>>;

struct PartitionReport {
  std::string partition;
  std::size_t n = 0;
  MetricReport correlation;
  MetricReport f_dissatisfactory;
  MetricReport accuracy;
};

inline std::vector<PartitionReport> evaluate_partitions(const TrainedModel& model, const FeatureMatrix& test,
                                                        const RowPartitions& partitions,
                                                        const BootstrapOptions& boot) {
  const auto pred = model.predict(test);
  std::vector<PartitionReport> out;
  for (const auto& [name, rows] : partitions) {
    PartitionReport pr;
    pr.partition = name;
    pr.n = rows.size();
    const auto t = select<double>(test.y, rows);
    const auto p = select<double>(pred, rows);
    pr.correlation = bootstrap_ci(Metric::pearson, t, p, boot);
    pr.f_dissatisfactory = bootstrap_ci(Metric::f_dissatisfactory, t, p, boot);
    pr.accuracy = bootstrap_ci(Metric::accuracy, t, p, boot);
    out.push_back(std::move(pr));
  }
  return out;
}

struct AblationRow {
  std::string removed;  // feature-set label, or "none"
  std::vector<PartitionReport> partitions;
  std::vector<std::string> features;  // columns the row's model was trained on
};

/// One row with the full schema, then one row per feature set with that
/// set's columns removed; every row retrains from scratch with `config`.
inline std::vector<AblationRow> ablation_study(const FeatureMatrix& train, const FeatureMatrix& test,
                                               const RowPartitions& partitions,
                                               const std::vector<std::string>& feature_sets,
                                               const ModelConfig& config, const BootstrapOptions& boot) {
  if (train.schema != test.schema) throw SchemaMismatch("train and test schemas differ");
  std::vector<std::string> removals = {"none"};
  removals.insert(removals.end(), feature_sets.begin(), feature_sets.end());
  std::vector<AblationRow> rows;
  for (const auto& removed : removals) {
    std::set<std::string> drop;
    if (removed != "none") drop.insert(removed);
    const auto tr = train.without_sets(drop);
    const auto te = test.without_sets(drop);
    if (tr.schema.size() == 0) throw ConfigError("removing '" + removed + "' leaves no features");
    const auto model = fit_model(config, tr);
    rows.push_back({removed, evaluate_partitions(model, te, partitions, boot), tr.schema.names()});
  }
  return rows;
}

/// Counts of integer-rounded ratings 1..5.
inline std::array<std::size_t, 5> rating_histogram(std::span<const double> ratings) {
  std::array<std::size_t, 5> h{};
  for (double r : ratings) {
    const int b = std::clamp(static_cast<int>(std::floor(r + 0.5)), 1, 5);
    ++h[static_cast<std::size_t>(b - 1)];
  }
  return h;
}

}  // namespace usat
