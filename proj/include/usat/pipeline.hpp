#pragma once

// Glue shared by the CLI, the service and the acceptance suite: split a
// corpus, build the popularity table from the training dialogues only, and
// featurize each partition.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "usat/corpus.hpp"
#include "usat/dataset.hpp"
#include "usat/dialogue_features.hpp"
#include "usat/evaluation.hpp"
#include "usat/turn_features.hpp"

namespace usat {

struct PipelineConfig {
  SplitRatios ratios;
  std::uint64_t seed = 0;
  std::set<std::string> holdout_applications;
  double smoothing = 1.0;
};

inline constexpr const char* kSingleTurn = "single-turn";
inline constexpr const char* kMultiTurn = "multi-turn";
inline constexpr const char* kHeldOut = "held-out application";

inline std::vector<Dialogue> dialogues_in(const Corpus& corpus, const std::set<std::string>& ids) {
  std::vector<Dialogue> out;
  for (const auto& d : corpus.dialogues)
    if (ids.count(d.dialogue_id)) out.push_back(d);
  return out;
}

/// Splits rows by dialogue tags: held-out application first, then
/// multi-turn vs single-turn. Empty groups are kept.
inline RowPartitions partition_rows(const FeatureMatrix& m, const Corpus& corpus,
                                    const std::set<std::string>& holdout_applications) {
  std::map<std::string, const Dialogue*> by_id;
  for (const auto& d : corpus.dialogues) by_id[d.dialogue_id] = &d;
  RowPartitions parts = {{kSingleTurn, {}}, {kMultiTurn, {}}, {kHeldOut, {}}};
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const Dialogue* d = by_id.at(m.keys[r].dialogue_id);
    if (holdout_applications.count(d->application)) parts[2].second.push_back(r);
    else if (d->multi_turn) parts[1].second.push_back(r);
    else parts[0].second.push_back(r);
  }
  return parts;
}

/// Rows of every partition except the held-out application.
inline std::vector<std::size_t> seen_rows(const RowPartitions& parts) {
  std::vector<std::size_t> rows;
  for (const auto& [name, r] : parts)
    if (name != kHeldOut) rows.insert(rows.end(), r.begin(), r.end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

struct TurnDatasets {
  DatasetSplit split;
  PopularityTable table;
  FeatureMatrix train;
  FeatureMatrix validation;
  FeatureMatrix test;
  RowPartitions test_partitions;
  RowPartitions validation_partitions;
};

inline PopularityTable training_popularity(const Corpus& corpus, const DatasetSplit& split, double smoothing) {
  return PopularityTable::build(dialogues_in(corpus, split.train), smoothing);
}

/// Labeled turn matrices per partition. Unlabeled turns are featurized for
/// context but produce no rows.
inline TurnDatasets prepare_turn_datasets(const Corpus& corpus, const Lexicon& lexicon, const PipelineConfig& cfg) {
  TurnDatasets ds;
  ds.split = split_dataset(corpus.dialogues, cfg.ratios, cfg.seed, cfg.holdout_applications);
  ds.table = training_popularity(corpus, ds.split, cfg.smoothing);
  const auto targets = build_turn_targets(corpus.annotations);
  ds.train = build_turn_matrix(dialogues_in(corpus, ds.split.train), ds.table, lexicon, &targets);
  ds.validation = build_turn_matrix(dialogues_in(corpus, ds.split.validation), ds.table, lexicon, &targets);
  ds.test = build_turn_matrix(dialogues_in(corpus, ds.split.test), ds.table, lexicon, &targets);
  ds.test_partitions = partition_rows(ds.test, corpus, cfg.holdout_applications);
  ds.validation_partitions = partition_rows(ds.validation, corpus, cfg.holdout_applications);
  return ds;
}

struct DialogueDatasets {
  DatasetSplit split;
  PopularityTable table;
  FeatureMatrix train;
  FeatureMatrix validation;
  FeatureMatrix test;
  RowPartitions test_partitions;
  RowPartitions validation_partitions;
};

/// Rated-dialogue matrices per partition. With `turn_model`, the
/// avg_predicted_turn_rating block is included.
inline DialogueDatasets prepare_dialogue_datasets(const Corpus& corpus, const Lexicon& lexicon,
                                                  const PipelineConfig& cfg, const TrainedModel* turn_model = nullptr) {
  DialogueDatasets ds;
  ds.split = split_dataset(corpus.dialogues, cfg.ratios, cfg.seed, cfg.holdout_applications);
  ds.table = training_popularity(corpus, ds.split, cfg.smoothing);
  const auto targets = build_dialogue_targets(corpus.ratings);
  auto build = [&](const std::set<std::string>& ids) {
    return build_dialogue_matrix(dialogues_in(corpus, ids), ds.table, lexicon, turn_model, &targets);
  };
  ds.train = build(ds.split.train);
  ds.validation = build(ds.split.validation);
  ds.test = build(ds.split.test);
  ds.test_partitions = partition_rows(ds.test, corpus, cfg.holdout_applications);
  ds.validation_partitions = partition_rows(ds.validation, corpus, cfg.holdout_applications);
  return ds;
}

}  // namespace usat
