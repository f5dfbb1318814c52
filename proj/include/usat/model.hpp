#pragma once

// The four interpretable regressors (lasso, CART, random forest, gradient
// boosting) behind one TrainedModel type.
//
// Every fit_* first reorders the training rows lexicographically by
// (features..., target). All later arithmetic and all random draws happen in
// that canonical order, so a fit does not depend on the order rows were
// supplied in. Forest tree t is seeded with derive_seed(seed, t).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "usat/dataset.hpp"
#include "usat/errors.hpp"
#include "usat/lasso.hpp"
#include "usat/matrix.hpp"
#include "usat/rng.hpp"
#include "usat/tree.hpp"

namespace usat {

enum class ModelKind { lasso, tree, forest, gbm };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::lasso: return "lasso";
    case ModelKind::tree: return "tree";
    case ModelKind::forest: return "forest";
    case ModelKind::gbm: return "gbm";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "lasso") return ModelKind::lasso;
  if (s == "tree") return ModelKind::tree;
  if (s == "forest") return ModelKind::forest;
  if (s == "gbm") return ModelKind::gbm;
  throw ConfigError("unknown model kind '" + std::string(s) + "' (expected lasso|tree|forest|gbm)");
}

struct EnsembleHyperparams {
  int n_trees = 100;
  double learning_rate = 0.1;           // gbm
  double feature_fraction = 1.0 / 3.0;  // forest, per split
  bool bootstrap = true;                // forest
  std::uint64_t seed = 0;

  void validate() const {
    if (n_trees < 0) throw ConfigError("n_trees must be >= 0");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("learning_rate must be in (0,1]");
    if (!(feature_fraction > 0.0 && feature_fraction <= 1.0)) throw ConfigError("feature_fraction must be in (0,1]");
  }

  friend bool operator==(const EnsembleHyperparams&, const EnsembleHyperparams&) = default;
};

struct ModelConfig {
  ModelKind kind = ModelKind::gbm;
  LassoHyperparams lasso;
  TreeHyperparams tree;
  EnsembleHyperparams ensemble;

  /// Tuned turn-level settings: lasso alpha 0.001; tree (33, 31, 23);
  /// forest (49, 11, 27); boosting (23, 17, 59) as (depth, leaf, split).
  static ModelConfig turn_level(ModelKind kind) {
    ModelConfig c;
    c.kind = kind;
    c.lasso.alpha = 0.001;
    switch (kind) {
      case ModelKind::tree: c.tree = {33, 31, 23}; break;
      case ModelKind::forest: c.tree = {49, 11, 27}; break;
      case ModelKind::gbm: c.tree = {23, 17, 59}; break;
      case ModelKind::lasso: break;
    }
    return c;
  }

  /// Tuned dialogue-level settings: alpha 0.01; tree (2, 5, 2); forest
  /// (4, 8, 13); boosting (2, 8, 17).
  static ModelConfig dialogue_level(ModelKind kind) {
    ModelConfig c;
    c.kind = kind;
    c.lasso.alpha = 0.01;
    switch (kind) {
      case ModelKind::tree: c.tree = {2, 5, 2}; break;
      case ModelKind::forest: c.tree = {4, 8, 13}; break;
      case ModelKind::gbm: c.tree = {2, 8, 17}; break;
      case ModelKind::lasso: break;
    }
    return c;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainedModel {
  ModelKind kind = ModelKind::gbm;
  std::vector<std::string> feature_names;
  ModelConfig config;

  // lasso
  LassoFit lasso;
  // tree: one tree; forest: mean of trees; gbm: base_score + learning_rate * sum
  std::vector<RegressionTree> trees;
  double base_score = 0.0;
  double learning_rate = 1.0;

  std::vector<double> importances;  // aligned with feature_names
  double clip_low = 1.0;
  double clip_high = 5.0;

  double predict_raw(std::span<const double> x) const {
    switch (kind) {
      case ModelKind::lasso: {
        double v = lasso.intercept;
        for (std::size_t j = 0; j < lasso.coefficients.size(); ++j) v += lasso.coefficients[j] * x[j];
        return v;
      }
      case ModelKind::tree: return trees.at(0).predict(x);
      case ModelKind::forest: {
        double v = 0.0;
        for (const auto& t : trees) v += t.predict(x);
        return v / static_cast<double>(trees.size());
      }
      case ModelKind::gbm: {
        double v = base_score;
        for (const auto& t : trees) v += learning_rate * t.predict(x);
        return v;
      }
    }
    return 0.0;
  }

  double predict(std::span<const double> x) const { return std::clamp(predict_raw(x), clip_low, clip_high); }

  std::vector<double> predict(const Matrix& X) const {
    if (X.cols() != feature_names.size())
      throw SchemaMismatch("matrix has " + std::to_string(X.cols()) + " columns, model expects " +
                           std::to_string(feature_names.size()));
    std::vector<double> out(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict(X.row(r));
    return out;
  }

  /// Checks that `m` carries exactly the model's features in order.
  std::vector<double> predict(const FeatureMatrix& m) const {
    if (m.schema.names() != feature_names) throw SchemaMismatch("feature schema differs from the model's schema");
    return predict(m.X);
  }

  bool has_signal() const {
    return std::any_of(importances.begin(), importances.end(), [](double v) { return v > 0.0; });
  }
};

namespace detail {

inline void check_training_data(const Matrix& X, std::span<const double> y) {
  if (X.rows() == 0) throw DataError("training data has no rows");
  if (y.size() != X.rows()) throw DataError("target length does not match row count");
  for (double v : X.data())
    if (!std::isfinite(v)) throw DataError("non-finite feature value");
  for (double v : y)
    if (!std::isfinite(v)) throw DataError("non-finite target value");
}

/// Rows sorted lexicographically by (x_0, ..., x_{p-1}, y).
inline std::pair<Matrix, std::vector<double>> canonical_rows(const Matrix& X, std::span<const double> y) {
  std::vector<std::size_t> order(X.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = X.row(a), rb = X.row(b);
    for (std::size_t j = 0; j < ra.size(); ++j)
      if (ra[j] != rb[j]) return ra[j] < rb[j];
    return y[a] < y[b];
  });
  return {X.select_rows(order), select<double>(y, order)};
}

inline std::vector<std::string> default_names(std::size_t p) {
  std::vector<std::string> names(p);
  for (std::size_t j = 0; j < p; ++j) names[j] = "x" + std::to_string(j);
  return names;
}

inline std::vector<double> normalized(std::vector<double> v) {
  double total = 0.0;
  for (double x : v) total += x;
  if (total > 0.0)
    for (double& x : v) x /= total;
  else
    std::fill(v.begin(), v.end(), 0.0);
  return v;
}

inline std::vector<double> tree_gains(std::span<const RegressionTree> trees, std::size_t p) {
  std::vector<double> gains(p, 0.0);
  for (const auto& t : trees) t.accumulate_gains(gains);
  return gains;
}

}  // namespace detail

inline TrainedModel fit_lasso(const Matrix& X, std::span<const double> y, const LassoHyperparams& hp) {
  detail::check_training_data(X, y);
  auto [Xc, yc] = detail::canonical_rows(X, y);
  TrainedModel m;
  m.kind = ModelKind::lasso;
  m.feature_names = detail::default_names(X.cols());
  m.config.kind = ModelKind::lasso;
  m.config.lasso = hp;
  m.lasso = lasso_coordinate_descent(Xc, yc, hp);
  std::vector<double> mags(X.cols());
  for (std::size_t j = 0; j < mags.size(); ++j) mags[j] = std::abs(m.lasso.standardized[j]);
  m.importances = detail::normalized(std::move(mags));
  return m;
}

inline TrainedModel fit_tree(const Matrix& X, std::span<const double> y, const TreeHyperparams& hp) {
  detail::check_training_data(X, y);
  hp.validate();
  auto [Xc, yc] = detail::canonical_rows(X, y);
  TrainedModel m;
  m.kind = ModelKind::tree;
  m.feature_names = detail::default_names(X.cols());
  m.config.kind = ModelKind::tree;
  m.config.tree = hp;
  m.trees.push_back(TreeTrainer(Xc).fit(yc, hp));
  m.importances = detail::normalized(detail::tree_gains(m.trees, X.cols()));
  return m;
}

inline TrainedModel fit_forest(const Matrix& X, std::span<const double> y, const TreeHyperparams& hp,
                               const EnsembleHyperparams& ens, unsigned threads = 0) {
  detail::check_training_data(X, y);
  hp.validate();
  ens.validate();
  if (ens.n_trees < 1) throw ConfigError("forest needs n_trees >= 1");
  auto [Xc, yc] = detail::canonical_rows(X, y);
  const std::size_t n = Xc.rows();
  std::vector<RegressionTree> trees(static_cast<std::size_t>(ens.n_trees));

  auto fit_one = [&](std::size_t t) {
    Rng rng(derive_seed(ens.seed, t));
    std::vector<std::uint32_t> slots(n);
    if (ens.bootstrap) {
      for (auto& s : slots) s = static_cast<std::uint32_t>(rng.index(n));
    } else {
      std::iota(slots.begin(), slots.end(), 0u);
    }
    TreeTrainer trainer(Xc, std::move(slots));
    trees[t] = trainer.fit(yc, hp, &rng, ens.feature_fraction);
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(trees.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t t; (t = next.fetch_add(1)) < trees.size();) fit_one(t);
    });
  for (auto& th : pool) th.join();

  TrainedModel m;
  m.kind = ModelKind::forest;
  m.feature_names = detail::default_names(X.cols());
  m.config.kind = ModelKind::forest;
  m.config.tree = hp;
  m.config.ensemble = ens;
  m.trees = std::move(trees);
  m.importances = detail::normalized(detail::tree_gains(m.trees, X.cols()));
  return m;
}

/// Squared-loss gradient boosting. When `mse_trace` is given it receives the
/// training MSE before the first stage and after every stage.
inline TrainedModel fit_gbm(const Matrix& X, std::span<const double> y, const TreeHyperparams& hp,
                            const EnsembleHyperparams& ens, std::vector<double>* mse_trace = nullptr) {
  detail::check_training_data(X, y);
  hp.validate();
  ens.validate();
  auto [Xc, yc] = detail::canonical_rows(X, y);
  const std::size_t n = Xc.rows();

  TrainedModel m;
  m.kind = ModelKind::gbm;
  m.feature_names = detail::default_names(X.cols());
  m.config.kind = ModelKind::gbm;
  m.config.tree = hp;
  m.config.ensemble = ens;
  m.learning_rate = ens.learning_rate;
  double sum = 0.0;
  for (double v : yc) sum += v;
  m.base_score = sum / static_cast<double>(n);

  std::vector<double> current(n, m.base_score), residual(n);
  auto record = [&] {
    if (!mse_trace) return;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (yc[i] - current[i]) * (yc[i] - current[i]);
    mse_trace->push_back(s / static_cast<double>(n));
  };
  record();

  const TreeTrainer trainer(Xc);
  for (int stage = 0; stage < ens.n_trees; ++stage) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = yc[i] - current[i];
    RegressionTree tree = trainer.fit(residual, hp);
    for (std::size_t i = 0; i < n; ++i) current[i] += m.learning_rate * tree.predict(Xc.row(i));
    m.trees.push_back(std::move(tree));
    record();
  }
  m.importances = detail::normalized(detail::tree_gains(m.trees, X.cols()));
  return m;
}

inline TrainedModel fit_model(const ModelConfig& config, const Matrix& X, std::span<const double> y) {
  switch (config.kind) {
    case ModelKind::lasso: return fit_lasso(X, y, config.lasso);
    case ModelKind::tree: return fit_tree(X, y, config.tree);
    case ModelKind::forest: return fit_forest(X, y, config.tree, config.ensemble);
    case ModelKind::gbm: return fit_gbm(X, y, config.tree, config.ensemble);
  }
  throw ConfigError("unknown model kind");
}

/// Fits on a labeled matrix and binds the model to its schema.
inline TrainedModel fit_model(const ModelConfig& config, const FeatureMatrix& data) {
  if (!data.labeled()) throw DataError("training matrix has no targets");
  TrainedModel m = fit_model(config, data.X, data.y);
  m.feature_names = data.schema.names();
  m.config = config;
  return m;
}

struct ImportanceReport {
  std::vector<std::pair<std::string, double>> ranked;  // descending, ties by schema order
  bool no_signal = true;
};

/// Normalized importances: |standardized coefficient| for lasso, total split
/// gain for tree models. Empty with no_signal set when nothing was learned.
inline ImportanceReport feature_importance(const TrainedModel& model) {
  ImportanceReport report;
  report.no_signal = !model.has_signal();
  if (report.no_signal) return report;
  std::vector<std::size_t> order(model.importances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return model.importances[a] > model.importances[b]; });
  for (auto i : order) {
    const std::string name = i < model.feature_names.size() ? model.feature_names[i] : "x" + std::to_string(i);
    report.ranked.emplace_back(name, model.importances[i]);
  }
  return report;
}

}  // namespace usat
