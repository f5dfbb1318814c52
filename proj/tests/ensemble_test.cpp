#include <gtest/gtest.h>

#include <cmath>

#include "usat/model.hpp"

using namespace usat;

namespace {

struct Data {
  Matrix X;
  std::vector<double> y;
};

// Integer-valued features so that any point of the grid is also a training value.
Data grid_data(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  Data d{Matrix(n, p), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) d.X(i, j) = static_cast<double>(rng.index(12));
    d.y[i] = 1.0 + 0.3 * d.X(i, 0) - 0.2 * d.X(i, 1) * (d.X(i, 2) > 5) + rng.normal(0, 0.3);
  }
  return d;
}

TreeHyperparams small_tree() { return {4, 3, 6}; }

EnsembleHyperparams ensemble(int n_trees, std::uint64_t seed) {
  EnsembleHyperparams e;
  e.n_trees = n_trees;
  e.seed = seed;
  e.feature_fraction = 0.5;
  return e;
}

std::vector<TrainedModel> all_models(const Data& d, std::uint64_t seed) {
  return {fit_tree(d.X, d.y, small_tree()), fit_forest(d.X, d.y, small_tree(), ensemble(15, seed)),
          fit_gbm(d.X, d.y, small_tree(), ensemble(30, seed))};
}

}  // namespace

TEST(Forest, DegenerateEnsembleEqualsTree) {
  const auto d = grid_data(120, 4, 1);
  EnsembleHyperparams e;
  e.n_trees = 1;
  e.bootstrap = false;
  e.feature_fraction = 1.0;
  const auto forest = fit_forest(d.X, d.y, small_tree(), e);
  const auto tree = fit_tree(d.X, d.y, small_tree());
  EXPECT_EQ(forest.predict(d.X), tree.predict(d.X));
  EXPECT_EQ(forest.trees[0], tree.trees[0]);
}

TEST(Forest, ConstantTargetAnySeed) {
  auto d = grid_data(50, 3, 2);
  std::fill(d.y.begin(), d.y.end(), 3.25);
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto m = fit_forest(d.X, d.y, small_tree(), ensemble(10, seed));
    for (double p : m.predict(d.X)) EXPECT_EQ(p, 3.25);
    EXPECT_TRUE(feature_importance(m).no_signal);
  }
}

TEST(Forest, SameSeedSamePredictionsAnyThreadCount) {
  const auto d = grid_data(200, 5, 3);
  const auto a = fit_forest(d.X, d.y, small_tree(), ensemble(20, 7), 1);
  const auto b = fit_forest(d.X, d.y, small_tree(), ensemble(20, 7), 4);
  const auto c = fit_forest(d.X, d.y, small_tree(), ensemble(20, 8), 4);
  EXPECT_EQ(a.trees, b.trees);
  EXPECT_NE(a.trees, c.trees);
}

TEST(Gbm, ZeroStagesPredictsMean) {
  const auto d = grid_data(40, 2, 4);
  const auto m = fit_gbm(d.X, d.y, small_tree(), ensemble(0, 1));
  double mean = 0.0;
  for (double v : d.y) mean += v;
  mean /= 40.0;
  for (double p : m.predict(d.X)) EXPECT_DOUBLE_EQ(p, std::clamp(mean, 1.0, 5.0));
  EXPECT_NEAR(m.base_score, mean, 1e-12);
}

TEST(Gbm, TrainingMseNeverIncreases) {
  const auto d = grid_data(300, 6, 5);
  for (double nu : {0.05, 0.3, 1.0}) {
    std::vector<double> trace;
    auto e = ensemble(60, 1);
    e.learning_rate = nu;
    fit_gbm(d.X, d.y, small_tree(), e, &trace);
    ASSERT_EQ(trace.size(), 61u);
    for (std::size_t s = 1; s < trace.size(); ++s) EXPECT_LE(trace[s], trace[s - 1]) << "nu " << nu << " stage " << s;
  }
}

TEST(Importance, SingleSplitTreeIsAllOneFeature) {
  Matrix X;
  for (double x : {0.0, 1.0, 2.0, 3.0}) X.append_row(std::vector<double>{7.0, x});
  const auto m = fit_tree(X, std::vector<double>{1, 1, 4, 4}, {1, 1, 2});
  const auto r = feature_importance(m);
  ASSERT_FALSE(r.no_signal);
  EXPECT_EQ(r.ranked[0].first, "x1");
  EXPECT_EQ(r.ranked[0].second, 1.0);
  EXPECT_EQ(r.ranked[1].second, 0.0);
}

TEST(Importance, SixPointTwoFeatureFixture) {
  // Root split on x0 removes SSE 512/3; the right child's split on x1
  // removes 2/3. Importances are therefore 256/257 and 1/257.
  Matrix X;
  const double rows[6][2] = {{0, 0}, {0, 1}, {0, 0}, {1, 1}, {1, 0}, {1, 1}};
  for (const auto& r : rows) X.append_row(std::vector<double>{r[0], r[1]});
  const std::vector<double> y = {0, 0, 0, 10, 10, 12};
  const auto m = fit_tree(X, y, {2, 1, 2});
  ASSERT_EQ(m.trees[0].leaf_count(), 3u);
  EXPECT_NEAR(m.trees[0].nodes[0].gain, 512.0 / 3.0, 1e-9);
  EXPECT_NEAR(m.importances[0], 256.0 / 257.0, 1e-12);
  EXPECT_NEAR(m.importances[1], 1.0 / 257.0, 1e-12);
}

TEST(Importance, SumsToOneWhenAnythingWasLearned) {
  const auto d = grid_data(150, 5, 6);
  for (const auto& m : all_models(d, 3)) {
    double total = 0.0;
    for (double v : m.importances) total += v;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

// Thresholds are midpoints, so a point strictly between two values a tree
// was fitted on may change side under a nonlinear map. The check therefore
// evaluates on the fitting rows only, with forest bootstrap off so that every
// row is in every tree's sample.
TEST(SplitModels, InvariantUnderMonotoneColumnTransform) {
  const auto d = grid_data(160, 4, 7);
  auto models = [](const Data& data) {
    auto e = ensemble(15, 11);
    e.bootstrap = false;
    return std::vector<TrainedModel>{fit_tree(data.X, data.y, small_tree()),
                                     fit_forest(data.X, data.y, small_tree(), e),
                                     fit_gbm(data.X, data.y, small_tree(), ensemble(30, 11))};
  };
  for (std::size_t col = 0; col < 4; ++col) {
    auto warped = d;
    for (std::size_t i = 0; i < d.X.rows(); ++i) {
      const double x = d.X(i, col);
      warped.X(i, col) = col % 2 ? std::exp(x / 3.0) : x * x * x + 2.0 * x - 40.0;
    }
    const auto plain = models(d), bent = models(warped);
    for (std::size_t k = 0; k < plain.size(); ++k)
      EXPECT_EQ(plain[k].predict(d.X), bent[k].predict(warped.X)) << to_string(plain[k].kind) << " col " << col;
  }
}

TEST(SplitModels, InvariantUnderRowPermutation) {
  const auto d = grid_data(140, 4, 8);
  std::vector<std::size_t> order(d.X.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(5);
  rng.shuffle(order);
  const Data shuffled{d.X.select_rows(order), select<double>(d.y, order)};
  const auto a = all_models(d, 2), b = all_models(shuffled, 2);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].trees, b[k].trees) << to_string(a[k].kind);
    EXPECT_EQ(a[k].predict(d.X), b[k].predict(d.X));
  }
}

TEST(Predict, ClipsToRatingScale) {
  TrainedModel m;
  m.kind = ModelKind::lasso;
  m.feature_names = {"x0"};
  m.lasso.coefficients = {1.0};
  m.lasso.intercept = 0.0;
  EXPECT_EQ(m.predict(std::vector<double>{5.7}), 5.0);
  EXPECT_EQ(m.predict(std::vector<double>{3.2}), 3.2);
  EXPECT_EQ(m.predict(std::vector<double>{-2.0}), 1.0);
  EXPECT_EQ(m.predict_raw(std::vector<double>{5.7}), 5.7);
}

TEST(Predict, BatchEqualsPerRow) {
  const auto d = grid_data(80, 3, 9);
  for (const auto& m : all_models(d, 4)) {
    const auto batch = m.predict(d.X);
    for (std::size_t i = 0; i < d.X.rows(); ++i) EXPECT_EQ(batch[i], m.predict(d.X.row(i)));
  }
  EXPECT_THROW(fit_tree(d.X, d.y, small_tree()).predict(Matrix(2, 5)), SchemaMismatch);
}

TEST(ModelConfig, TunedDefaults) {
  EXPECT_EQ(ModelConfig::turn_level(ModelKind::gbm).tree, (TreeHyperparams{23, 17, 59}));
  EXPECT_EQ(ModelConfig::turn_level(ModelKind::tree).tree, (TreeHyperparams{33, 31, 23}));
  EXPECT_EQ(ModelConfig::turn_level(ModelKind::forest).tree, (TreeHyperparams{49, 11, 27}));
  EXPECT_EQ(ModelConfig::turn_level(ModelKind::lasso).lasso.alpha, 0.001);
  EXPECT_EQ(ModelConfig::dialogue_level(ModelKind::gbm).tree, (TreeHyperparams{2, 8, 17}));
  EXPECT_EQ(ModelConfig::dialogue_level(ModelKind::tree).tree, (TreeHyperparams{2, 5, 2}));
  EXPECT_EQ(ModelConfig::dialogue_level(ModelKind::forest).tree, (TreeHyperparams{4, 8, 13}));
  EXPECT_EQ(ModelConfig::dialogue_level(ModelKind::lasso).lasso.alpha, 0.01);
  EXPECT_THROW(parse_model_kind("svr"), ConfigError);
}
