#pragma once

// Dialogue-level features: the turn features of the last turn, aggregates
// over all turns, and optionally the mean turn rating predicted by a
// turn-level model.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "usat/dataset.hpp"
#include "usat/model.hpp"
#include "usat/turn_features.hpp"

namespace usat {

inline FeatureSchema dialogue_schema(bool with_turn_rating) {
  FeatureSchema s;
  const auto& turn = turn_schema();
  for (std::size_t i = 0; i < turn.size(); ++i) s.add("last_" + turn.name(i), turn.set_of(i));
  for (const char* name : {"avg_asr_confidence", "avg_nlu_confidence", "barge_in_count", "question_prompt_count",
                           "avg_seconds_between_user_requests", "dialogue_length", "avg_domain_popularity",
                           "avg_intent_popularity", "last_turn_intent_popularity"})
    s.add(name, feature_set::aggregate);
  if (with_turn_rating) s.add("avg_predicted_turn_rating", feature_set::turn_rating);
  return s;
}

/// Number of system responses containing a question mark.
inline std::size_t question_prompt_count(std::span<const Turn> turns) {
  std::size_t n = 0;
  for (const auto& t : turns) n += t.system_response.find('?') != std::string::npos;
  return n;
}

/// Mean of the turn model's clipped predictions over every turn of `d`.
inline double average_predicted_turn_rating(const Dialogue& d, const PopularityTable& table, const Lexicon& lexicon,
                                            const TrainedModel& turn_model) {
  const TurnFeaturizer featurizer{table, lexicon};
  const auto cols = turn_schema().locate(turn_model.feature_names);
  std::vector<double> x(cols.size());
  double sum = 0.0;
  for (std::size_t n = 0; n < d.turns.size(); ++n) {
    const auto all = featurizer.full(d, n);
    for (std::size_t j = 0; j < cols.size(); ++j) x[j] = all[cols[j]];
    sum += turn_model.predict(x);
  }
  return sum / static_cast<double>(d.turns.size());
}

/// `turn_model` may be null; the rating block is present iff it is not.
inline FeatureVector featurize_dialogue(const Dialogue& d, const PopularityTable& table, const Lexicon& lexicon,
                                        const TrainedModel* turn_model = nullptr) {
  if (d.turns.empty()) throw DataError("dialogue '" + d.dialogue_id + "' has no turns");
  using K = PopularityTable::Kind;
  const std::size_t N = d.turns.size();
  const double nd = static_cast<double>(N);

  FeatureVector v;
  v.dialogue_id = d.dialogue_id;
  v.turn_index = -1;
  v.values = TurnFeaturizer{table, lexicon}.full(d, N - 1);

  double asr = 0.0, nlu = 0.0, barge = 0.0, dom = 0.0, intent = 0.0;
  for (const auto& t : d.turns) {
    asr += t.asr_confidence;
    nlu += t.nlu_confidence;
    barge += t.barge_in ? 1.0 : 0.0;
    dom += table.log_usage(K::domain, t.domain);
    intent += table.log_usage(K::intent, t.intent);
  }
  const double gaps = N > 1 ? (d.turns.back().user_timestamp - d.turns.front().user_timestamp) / (nd - 1.0) : 0.0;
  const double append[] = {asr / nd,
                           nlu / nd,
                           barge,
                           static_cast<double>(question_prompt_count(d.turns)),
                           gaps,
                           nd,
                           dom / nd,
                           intent / nd,
                           table.log_usage(K::intent, d.turns.back().intent)};
  v.values.insert(v.values.end(), std::begin(append), std::end(append));
  if (turn_model) v.values.push_back(average_predicted_turn_rating(d, table, lexicon, *turn_model));
  return v;
}

/// One row per dialogue; with `targets`, unrated dialogues are skipped.
inline FeatureMatrix build_dialogue_matrix(std::span<const Dialogue> dialogues, const PopularityTable& table,
                                           const Lexicon& lexicon, const TrainedModel* turn_model = nullptr,
                                           const std::map<std::string, double>* targets = nullptr) {
  FeatureMatrix m;
  m.schema = dialogue_schema(turn_model != nullptr);
  m.X = Matrix(0, m.schema.size());
  for (const auto& d : dialogues) {
    double target = 0.0;
    if (targets) {
      auto it = targets->find(d.dialogue_id);
      if (it == targets->end()) continue;
      target = it->second;
    }
    const auto v = featurize_dialogue(d, table, lexicon, turn_model);
    m.append(v.values, {d.dialogue_id, -1});
    if (targets) m.y.push_back(target);
  }
  return m;
}

/// Dialogue-level fit with the dialogue-level default hyperparameters for
/// `kind`, unless an explicit config is supplied.
inline TrainedModel fit_dialogue_model(const FeatureMatrix& features, ModelKind kind,
                                       const ModelConfig* config = nullptr) {
  return fit_model(config ? *config : ModelConfig::dialogue_level(kind), features);
}

}  // namespace usat
