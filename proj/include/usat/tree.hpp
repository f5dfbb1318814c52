#pragma once

// CART regression trees.
//
// Split search is greedy: at each node every candidate (feature, threshold)
// is scored by the weighted child sum of squared errors, where candidates are
// midpoints between consecutive distinct sorted values of a feature. A sample
// goes left iff x[feature] <= threshold. Ties go to the lowest feature index,
// then the lowest threshold. A node becomes a leaf when it reaches max_depth,
// holds fewer than min_samples_split samples, has zero impurity, or admits no
// split leaving min_samples_leaf samples on both sides. Leaves predict the mean
// target of their samples.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "usat/errors.hpp"
#include "usat/matrix.hpp"
#include "usat/rng.hpp"

namespace usat {

struct TreeHyperparams {
  int max_depth = 33;
  int min_samples_leaf = 31;
  int min_samples_split = 23;

  void validate() const {
    if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    if (min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
  }

  friend bool operator==(const TreeHyperparams&, const TreeHyperparams&) = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  std::uint32_t n_samples = 0;
  double gain = 0.0;  // SSE reduction of this split

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class RegressionTree {
 public:
  std::vector<TreeNode> nodes;

  std::size_t leaf_of(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf())
      i = static_cast<std::size_t>(x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right);
    return i;
  }

  double predict(std::span<const double> x) const { return nodes[leaf_of(x)].value; }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](auto& n) { return n.is_leaf(); }));
  }

  std::size_t depth() const { return depth_from(0); }

  /// Adds each split's gain to importance[feature].
  void accumulate_gains(std::span<double> importance) const {
    for (const auto& n : nodes)
      if (!n.is_leaf()) importance[n.feature] += n.gain;
  }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  std::size_t depth_from(std::size_t i) const {
    if (nodes[i].is_leaf()) return 0;
    return 1 + std::max(depth_from(nodes[i].left), depth_from(nodes[i].right));
  }
};

/// Reusable CART trainer over a fixed design. Samples ("slots") refer to rows
/// of X and may repeat, which is how bootstrap resamples are expressed. Each
/// feature's slot order is sorted once and reused for every tree fitted on
/// the same slots.
class TreeTrainer {
 public:
  TreeTrainer(const Matrix& X, std::vector<std::uint32_t> slot_rows) : X_(X), rows_(std::move(slot_rows)) {
    const std::size_t p = X_.cols();
    presorted_.resize(p);
    for (std::size_t f = 0; f < p; ++f) {
      auto& order = presorted_[f];
      order.resize(rows_.size());
      std::iota(order.begin(), order.end(), 0u);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return value(a, f) < value(b, f); });
    }
  }

  explicit TreeTrainer(const Matrix& X) : TreeTrainer(X, identity(X.rows())) {}

  /// `targets` is indexed by row of X. With `rng` and feature_fraction < 1,
  /// each node considers a random subset of features.
  RegressionTree fit(std::span<const double> targets, const TreeHyperparams& hp, Rng* rng = nullptr,
                     double feature_fraction = 1.0) const {
    hp.validate();
    Build b{*this, targets, hp, rng, feature_fraction, {}, {}};
    const std::size_t n = rows_.size();
    b.slot_left.assign(n, 0);
    std::vector<std::uint32_t> members(n);
    std::iota(members.begin(), members.end(), 0u);
    b.grow(members, presorted_, 0);
    return RegressionTree{std::move(b.nodes)};
  }

  std::size_t n_slots() const { return rows_.size(); }

 private:
  static std::vector<std::uint32_t> identity(std::size_t n) {
    std::vector<std::uint32_t> v(n);
    std::iota(v.begin(), v.end(), 0u);
    return v;
  }

  double value(std::uint32_t slot, std::size_t f) const { return X_(rows_[slot], f); }

  struct Build {
    const TreeTrainer& self;
    std::span<const double> targets;
    const TreeHyperparams& hp;
    Rng* rng;
    double feature_fraction;
    std::vector<TreeNode> nodes;
    std::vector<char> slot_left;

    double y(std::uint32_t slot) const { return targets[self.rows_[slot]]; }

    std::vector<std::size_t> candidate_features() {
      const std::size_t p = self.X_.cols();
      std::vector<std::size_t> feats(p);
      std::iota(feats.begin(), feats.end(), std::size_t{0});
      if (rng == nullptr || feature_fraction >= 1.0) return feats;
      const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(feature_fraction * p));
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng->index(p - i));
        std::swap(feats[i], feats[j]);
      }
      feats.resize(k);
      std::sort(feats.begin(), feats.end());
      return feats;
    }

    // `members` lists the node's slots in ascending order; `sorted[f]` lists
    // the same slots ordered by feature f.
    int grow(const std::vector<std::uint32_t>& members, const std::vector<std::vector<std::uint32_t>>& sorted,
             int depth) {
      const int id = static_cast<int>(nodes.size());
      nodes.emplace_back();
      const std::size_t m = members.size();
      double sum = 0.0, lo = y(members[0]), hi = lo;
      for (auto s : members) {
        const double v = y(s);
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      nodes[id].value = sum / static_cast<double>(m);
      nodes[id].n_samples = static_cast<std::uint32_t>(m);

      if (depth >= hp.max_depth || m < static_cast<std::size_t>(hp.min_samples_split) || lo == hi) return id;

      const std::size_t min_leaf = static_cast<std::size_t>(hp.min_samples_leaf);
      double best_score = -1.0;
      int best_feature = -1;
      double best_threshold = 0.0;
      for (std::size_t f : candidate_features()) {
        const auto& order = sorted[f];
        double left_sum = 0.0;
        for (std::size_t i = 0; i + 1 < m; ++i) {
          left_sum += y(order[i]);
          const double a = self.value(order[i], f);
          const double b = self.value(order[i + 1], f);
          if (!(a < b)) continue;
          const std::size_t n_left = i + 1, n_right = m - n_left;
          if (n_left < min_leaf) continue;
          if (n_right < min_leaf) break;
          const double right_sum = sum - left_sum;
          const double score = left_sum * left_sum / static_cast<double>(n_left) +
                               right_sum * right_sum / static_cast<double>(n_right);
          if (score > best_score) {
            best_score = score;
            best_feature = static_cast<int>(f);
            double t = a + (b - a) / 2.0;
            if (!(t < b)) t = a;
            best_threshold = t;
          }
        }
      }
      if (best_feature < 0) return id;
      const double gain = best_score - sum * sum / static_cast<double>(m);
      if (!(gain > 0.0)) return id;

      const auto f = static_cast<std::size_t>(best_feature);
      std::vector<std::uint32_t> left_members, right_members;
      for (auto s : members) {
        const bool left = self.value(s, f) <= best_threshold;
        slot_left[s] = left ? 1 : 0;
        (left ? left_members : right_members).push_back(s);
      }
      std::vector<std::vector<std::uint32_t>> left_sorted(sorted.size()), right_sorted(sorted.size());
      for (std::size_t g = 0; g < sorted.size(); ++g) {
        left_sorted[g].reserve(left_members.size());
        right_sorted[g].reserve(right_members.size());
        for (auto s : sorted[g]) (slot_left[s] ? left_sorted[g] : right_sorted[g]).push_back(s);
      }
      nodes[id].feature = best_feature;
      nodes[id].threshold = best_threshold;
      nodes[id].gain = gain;
      const int l = grow(left_members, left_sorted, depth + 1);
      left_sorted.clear();
      left_sorted.shrink_to_fit();
      const int r = grow(right_members, right_sorted, depth + 1);
      nodes[id].left = l;
      nodes[id].right = r;
      return id;
    }
  };

  const Matrix& X_;
  std::vector<std::uint32_t> rows_;
  std::vector<std::vector<std::uint32_t>> presorted_;
};

}  // namespace usat
