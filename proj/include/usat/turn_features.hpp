#pragma once

// Turn-level features. For turn n of a dialogue, turn-based features read
// t_n (and t_{n-1} for paraphrasing); dialogue-based features read t_0..t_n.
// The only look-ahead is seconds_to_next_user_request, which reads the
// timestamp of t_{n+1}.

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "usat/corpus.hpp"
#include "usat/dataset.hpp"
#include "usat/text.hpp"

namespace usat {

/// Corpus-wide usage statistics per domain and per intent.
///
/// usage(key)     = number of turns with that key
/// customers(key) = number of distinct customers issuing it
/// ratio(key)     = (usage + k) / (customers + k * V)
///
/// where k is the additive smoothing constant and V = max(1, number of
/// distinct keys of that kind). An unseen key gets k / (k * V) = 1 / V for
/// k > 0, and 0 for k = 0.
class PopularityTable {
 public:
  struct Stats {
    std::uint64_t usage = 0;
    std::uint64_t customers = 0;
    friend bool operator==(const Stats&, const Stats&) = default;
  };

  enum class Kind { domain, intent };

  PopularityTable() = default;

  static PopularityTable build(std::span<const Dialogue> training, double smoothing = 1.0) {
    if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) throw ConfigError("smoothing must be >= 0");
    PopularityTable t;
    t.smoothing_ = smoothing;
    std::map<std::string, std::set<std::string>> domain_customers, intent_customers;
    for (const auto& d : training) {
      for (const auto& turn : d.turns) {
        ++t.domains_[turn.domain].usage;
        ++t.intents_[turn.intent].usage;
        domain_customers[turn.domain].insert(d.customer_id);
        intent_customers[turn.intent].insert(d.customer_id);
        ++t.total_turns_;
      }
    }
    for (auto& [k, s] : t.domains_) s.customers = domain_customers[k].size();
    for (auto& [k, s] : t.intents_) s.customers = intent_customers[k].size();
    return t;
  }

  Stats stats(Kind kind, const std::string& key) const {
    const auto& m = kind == Kind::domain ? domains_ : intents_;
    auto it = m.find(key);
    return it == m.end() ? Stats{} : it->second;
  }

  std::size_t vocabulary(Kind kind) const { return (kind == Kind::domain ? domains_ : intents_).size(); }

  /// log(1 + usage).
  double log_usage(Kind kind, const std::string& key) const {
    return std::log1p(static_cast<double>(stats(kind, key).usage));
  }

  /// Smoothed usage-to-customer ratio; always finite.
  double ratio(Kind kind, const std::string& key) const {
    const Stats s = stats(kind, key);
    const double v = static_cast<double>(std::max<std::size_t>(1, vocabulary(kind)));
    const double num = static_cast<double>(s.usage) + smoothing_;
    const double den = static_cast<double>(s.customers) + smoothing_ * v;
    return den > 0.0 ? num / den : 0.0;
  }

  double smoothing() const { return smoothing_; }
  std::uint64_t total_turns() const { return total_turns_; }
  const std::map<std::string, Stats>& domains() const { return domains_; }
  const std::map<std::string, Stats>& intents() const { return intents_; }

  Json to_json() const {
    auto dump = [](const std::map<std::string, Stats>& m) {
      Json j = Json::object();
      for (const auto& [k, s] : m) j[k] = {{"usage", s.usage}, {"customers", s.customers}};
      return j;
    };
    return {{"smoothing", smoothing_}, {"total_turns", total_turns_},
            {"domains", dump(domains_)}, {"intents", dump(intents_)}};
  }

  static PopularityTable from_json(const Json& j) {
    PopularityTable t;
    try {
      t.smoothing_ = j.at("smoothing").get<double>();
      t.total_turns_ = j.at("total_turns").get<std::uint64_t>();
      for (auto it = j.at("domains").begin(); it != j.at("domains").end(); ++it)
        t.domains_[it.key()] = {it.value().at("usage").get<std::uint64_t>(),
                                it.value().at("customers").get<std::uint64_t>()};
      for (auto it = j.at("intents").begin(); it != j.at("intents").end(); ++it)
        t.intents_[it.key()] = {it.value().at("usage").get<std::uint64_t>(),
                                it.value().at("customers").get<std::uint64_t>()};
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("invalid popularity table: ") + e.what());
    }
    return t;
  }

  friend bool operator==(const PopularityTable&, const PopularityTable&) = default;

 private:
  std::map<std::string, Stats> domains_;
  std::map<std::string, Stats> intents_;
  std::uint64_t total_turns_ = 0;
  double smoothing_ = 1.0;
};

struct ParaphraseFeatures {
  double syntactic_similarity = 0.0;
  double same_intent = 0.0;
};

/// Similarity of consecutive user requests; both zero without a previous turn.
inline ParaphraseFeatures paraphrase_features(const Turn* previous, const Turn& current) {
  if (previous == nullptr) return {};
  return {jaccard(tokenize(previous->user_utterance), tokenize(current.user_utterance)),
          previous->intent == current.intent ? 1.0 : 0.0};
}

inline double cohesion(std::string_view user_request, std::string_view system_response) {
  return jaccard(tokenize(user_request), tokenize(system_response));
}

struct PopularityFeatures {
  double domain_usage = 0.0;
  double intent_usage = 0.0;
  double domain_per_customer_ratio = 0.0;
  double intent_per_customer_ratio = 0.0;
};

inline PopularityFeatures popularity_features(const Turn& turn, const PopularityTable& table) {
  using K = PopularityTable::Kind;
  return {table.log_usage(K::domain, turn.domain), table.log_usage(K::intent, turn.intent),
          table.ratio(K::domain, turn.domain), table.ratio(K::intent, turn.intent)};
}

/// Distinct intents among turns[0..n] divided by n + 1.
inline double topic_diversity(std::span<const Turn> turns, std::size_t n) {
  std::set<std::string> intents;
  for (std::size_t i = 0; i <= n; ++i) intents.insert(turns[i].intent);
  return static_cast<double>(intents.size()) / static_cast<double>(n + 1);
}

struct BaselineFeatures {
  double asr_confidence = 0.0;
  double nlu_confidence = 0.0;
  double user_request_token_length = 0.0;
  double system_response_token_length = 0.0;
  double seconds_to_next_user_request = 0.0;
  double dialogue_length_so_far = 0.0;
  double barge_in = 0.0;
};

inline BaselineFeatures baseline_features(const Dialogue& d, std::size_t n) {
  const Turn& t = d.turns.at(n);
  BaselineFeatures f;
  f.asr_confidence = t.asr_confidence;
  f.nlu_confidence = t.nlu_confidence;
  f.user_request_token_length = static_cast<double>(tokenize(t.user_utterance).size());
  f.system_response_token_length = static_cast<double>(tokenize(t.system_response).size());
  if (n + 1 < d.turns.size()) f.seconds_to_next_user_request = d.turns[n + 1].user_timestamp - t.user_timestamp;
  f.dialogue_length_so_far = static_cast<double>(n + 1);
  f.barge_in = t.barge_in ? 1.0 : 0.0;
  return f;
}

/// Full turn-level schema in canonical order.
inline const FeatureSchema& turn_schema() {
  static const FeatureSchema schema = [] {
    namespace fs = feature_set;
    FeatureSchema s;
    s.add("paraphrase_syntactic_similarity", fs::paraphrase);
    s.add("paraphrase_same_intent", fs::paraphrase);
    s.add("cohesion", fs::cohesion);
    s.add("domain_usage", fs::popularity);
    s.add("intent_usage", fs::popularity);
    s.add("domain_per_customer_ratio", fs::popularity);
    s.add("intent_per_customer_ratio", fs::popularity);
    s.add("unactionable", fs::unactionable);
    s.add("topic_diversity", fs::diversity);
    s.add("asr_confidence", fs::baseline);
    s.add("nlu_confidence", fs::baseline);
    s.add("user_request_token_length", fs::baseline);
    s.add("system_response_token_length", fs::baseline);
    s.add("seconds_to_next_user_request", fs::baseline);
    s.add("dialogue_length_so_far", fs::baseline);
    s.add("barge_in", fs::baseline);
    return s;
  }();
  return schema;
}

struct TurnFeaturizer {
  const PopularityTable& table;
  const Lexicon& lexicon;

  /// All features of turn_schema() for turn n.
  std::vector<double> full(const Dialogue& d, std::size_t n) const {
    if (n >= d.turns.size()) throw std::out_of_range("turn index " + std::to_string(n) + " out of range");
    const Turn& t = d.turns[n];
    const auto para = paraphrase_features(n > 0 ? &d.turns[n - 1] : nullptr, t);
    const auto pop = popularity_features(t, table);
    const auto base = baseline_features(d, n);
    return {para.syntactic_similarity,
            para.same_intent,
            cohesion(t.user_utterance, t.system_response),
            pop.domain_usage,
            pop.intent_usage,
            pop.domain_per_customer_ratio,
            pop.intent_per_customer_ratio,
            unactionable_flag(t.system_response, lexicon),
            topic_diversity(d.turns, n),
            base.asr_confidence,
            base.nlu_confidence,
            base.user_request_token_length,
            base.system_response_token_length,
            base.seconds_to_next_user_request,
            base.dialogue_length_so_far,
            base.barge_in};
  }
};

/// Feature vector for turn n laid out in `schema`, whose names must all be
/// turn-level feature names.
inline FeatureVector featurize_turn(const Dialogue& d, std::size_t n, const PopularityTable& table,
                                    const Lexicon& lexicon, const FeatureSchema& schema = turn_schema()) {
  const auto all = TurnFeaturizer{table, lexicon}.full(d, n);
  FeatureVector v{{}, d.dialogue_id, static_cast<int>(n)};
  if (schema == turn_schema()) {
    v.values = all;
  } else {
    for (auto c : turn_schema().locate(schema.names())) v.values.push_back(all[c]);
  }
  return v;
}

/// Feature rows for every turn of `dialogues` in order. When `targets` is
/// given, only labeled turns are kept and y is filled.
inline FeatureMatrix build_turn_matrix(std::span<const Dialogue> dialogues, const PopularityTable& table,
                                       const Lexicon& lexicon, const std::map<TurnKey, double>* targets = nullptr,
                                       const FeatureSchema& schema = turn_schema()) {
  FeatureMatrix m;
  m.schema = schema;
  m.X = Matrix(0, schema.size());
  for (const auto& d : dialogues) {
    for (std::size_t n = 0; n < d.turns.size(); ++n) {
      TurnKey key{d.dialogue_id, static_cast<int>(n)};
      double target = 0.0;
      if (targets) {
        auto it = targets->find(key);
        if (it == targets->end()) continue;
        target = it->second;
      }
      auto v = featurize_turn(d, n, table, lexicon, schema);
      m.append(v.values, std::move(key));
      if (targets) m.y.push_back(target);
    }
  }
  return m;
}

}  // namespace usat
