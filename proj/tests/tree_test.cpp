#include <gtest/gtest.h>

#include "usat/model.hpp"
#include "usat/tree.hpp"

using namespace usat;

namespace {
Matrix column(std::initializer_list<double> xs) {
  Matrix X;
  for (double x : xs) X.append_row(std::vector<double>{x});
  return X;
}

RegressionTree grow(const Matrix& X, const std::vector<double>& y, TreeHyperparams hp) {
  return TreeTrainer(X).fit(y, hp);
}
}  // namespace

TEST(Tree, ConstantTargetIsOneLeaf) {
  const auto X = column({1, 2, 3, 4});
  const auto t = grow(X, {2.5, 2.5, 2.5, 2.5}, {10, 1, 2});
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.predict(std::vector<double>{100}), 2.5);
}

TEST(Tree, TwoPointsSplitAtMidpoint) {
  const auto t = grow(column({0, 1}), {0, 10}, {1, 1, 2});
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_EQ(t.nodes[0].feature, 0);
  EXPECT_EQ(t.nodes[0].threshold, 0.5);
  EXPECT_EQ(t.predict(std::vector<double>{0.0}), 0.0);
  EXPECT_EQ(t.predict(std::vector<double>{0.5}), 0.0);  // boundary goes left
  EXPECT_EQ(t.predict(std::vector<double>{0.7}), 10.0);
  EXPECT_EQ(t.nodes[0].gain, 50.0);
}

TEST(Tree, TiesPreferLowestFeatureThenThreshold) {
  // Both features separate y identically; feature 0 must win.
  Matrix X;
  X.append_row(std::vector<double>{0, 5});
  X.append_row(std::vector<double>{1, 6});
  X.append_row(std::vector<double>{2, 7});
  X.append_row(std::vector<double>{3, 8});
  const auto t = grow(X, {1, 1, 9, 9}, {1, 1, 2});
  EXPECT_EQ(t.nodes[0].feature, 0);
  EXPECT_EQ(t.nodes[0].threshold, 1.5);
  // Symmetric target: splits at 0.5 and 2.5 tie; the lower threshold wins.
  const auto u = grow(column({0, 1, 2, 3}), {0, 5, 5, 0}, {1, 1, 2});
  EXPECT_EQ(u.nodes[0].threshold, 0.5);
}

TEST(Tree, StoppingRules) {
  const auto X = column({0, 1, 2, 3, 4, 5, 6, 7});
  const std::vector<double> y = {0, 1, 2, 3, 4, 5, 6, 7};
  EXPECT_EQ(grow(X, y, {1, 1, 2}).leaf_count(), 2u);
  EXPECT_LE(grow(X, y, {2, 1, 2}).depth(), 2u);
  EXPECT_EQ(grow(X, y, {10, 1, 2}).leaf_count(), 8u);
  EXPECT_EQ(grow(X, y, {10, 1, 9}).leaf_count(), 1u);  // fewer than min_samples_split
  for (const auto& n : grow(X, y, {10, 3, 2}).nodes) EXPECT_GE(n.n_samples, 3u);
  const auto t = grow(X, y, {10, 4, 2});
  ASSERT_EQ(t.leaf_count(), 2u);
  EXPECT_EQ(t.nodes[0].threshold, 3.5);
}

TEST(Tree, RepeatedValuesAreNeverSplitApart) {
  const auto t = grow(column({1, 1, 1, 2, 2}), {0, 1, 2, 10, 11}, {5, 1, 2});
  EXPECT_EQ(t.nodes[0].threshold, 1.5);
  for (const auto& n : t.nodes) EXPECT_TRUE(n.is_leaf() || n.feature == 0);
  EXPECT_EQ(t.leaf_count(), 2u);
}

TEST(Tree, LeavesPredictMeans) {
  const auto t = grow(column({0, 0, 1, 1}), {1, 3, 10, 20}, {1, 1, 2});
  EXPECT_EQ(t.predict(std::vector<double>{0}), 2.0);
  EXPECT_EQ(t.predict(std::vector<double>{1}), 15.0);
}

TEST(Tree, DuplicatedSlotsActAsWeights) {
  const auto X = column({0, 1, 2});
  const TreeTrainer trainer(X, {0, 0, 0, 1, 2});
  const auto t = trainer.fit(std::vector<double>{0, 3, 6}, {1, 1, 2});
  // Slot mean of the whole node is (0+0+0+3+6)/5.
  EXPECT_DOUBLE_EQ(t.nodes[0].value, 9.0 / 5.0);
  EXPECT_EQ(t.nodes[0].n_samples, 5u);
}

TEST(Tree, HyperparamValidation) {
  const auto X = column({0, 1});
  EXPECT_THROW(grow(X, {0, 1}, {0, 1, 2}), ConfigError);
  EXPECT_THROW(grow(X, {0, 1}, {1, 0, 2}), ConfigError);
  EXPECT_THROW(grow(X, {0, 1}, {1, 1, 1}), ConfigError);
  EXPECT_THROW(fit_tree(Matrix(0, 1), std::vector<double>{}, {}), DataError);
}
