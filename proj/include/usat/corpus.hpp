#pragma once

// Dialogue data model, line-delimited record I/O, regression targets and
// dataset splits.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "usat/errors.hpp"
#include "usat/rng.hpp"

namespace usat {

using Json = nlohmann::ordered_json;

enum class Cohort { novice, experienced, unknown };

inline const char* to_string(Cohort c) {
  switch (c) {
    case Cohort::novice: return "novice";
    case Cohort::experienced: return "experienced";
    case Cohort::unknown: break;
  }
  return "unknown";
}

inline std::optional<Cohort> parse_cohort(std::string_view s) {
  if (s == "novice") return Cohort::novice;
  if (s == "experienced") return Cohort::experienced;
  if (s == "unknown") return Cohort::unknown;
  return std::nullopt;
}

struct Turn {
  int turn_index = 0;
  std::string user_utterance;
  std::string system_response;
  double asr_confidence = 1.0;
  double nlu_confidence = 1.0;
  std::string intent;
  std::string domain;
  double user_timestamp = 0.0;
  bool barge_in = false;
  Json extra = Json::object();  // unknown fields, preserved on round-trip

  friend bool operator==(const Turn&, const Turn&) = default;
};

struct Dialogue {
  std::string dialogue_id;
  std::string customer_id;
  Cohort cohort = Cohort::unknown;
  std::string application;
  bool multi_turn = false;
  std::vector<Turn> turns;
  Json extra = Json::object();

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

struct TurnAnnotation {
  std::string dialogue_id;
  int turn_index = 0;
  std::string annotator_id;
  int rq_rating = 3;
  Json extra = Json::object();

  friend bool operator==(const TurnAnnotation&, const TurnAnnotation&) = default;
};

struct DialogueRating {
  std::string dialogue_id;
  std::string rater_id;
  int rating = 3;
  Json extra = Json::object();

  friend bool operator==(const DialogueRating&, const DialogueRating&) = default;
};

struct TurnKey {
  std::string dialogue_id;
  int turn_index = 0;

  friend auto operator<=>(const TurnKey&, const TurnKey&) = default;
};

/// Problem found while reading a record stream. `line` is 1-based.
struct Diagnostic {
  std::size_t line = 0;
  std::string field;
  std::string message;

  std::string str() const {
    std::ostringstream os;
    os << "line " << line;
    if (!field.empty()) os << ", field '" << field << "'";
    os << ": " << message;
    return os.str();
  }
};

template <class T>
struct ParseResult {
  std::vector<T> records;
  std::vector<Diagnostic> diagnostics;
};

struct Corpus {
  std::vector<Dialogue> dialogues;
  std::vector<TurnAnnotation> annotations;
  std::vector<DialogueRating> ratings;

  const Dialogue* find(std::string_view dialogue_id) const {
    for (const auto& d : dialogues)
      if (d.dialogue_id == dialogue_id) return &d;
    return nullptr;
  }

  std::size_t turn_count() const {
    std::size_t n = 0;
    for (const auto& d : dialogues) n += d.turns.size();
    return n;
  }
};

namespace detail {

struct FieldError {
  std::string field;
  std::string message;
};

class RecordReader {
 public:
  RecordReader(const Json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {}

  std::string path(std::string_view name) const {
    return prefix_.empty() ? std::string(name) : prefix_ + "." + std::string(name);
  }

  const Json& require(std::string_view name) {
    seen_.insert(std::string(name));
    auto it = obj_.find(std::string(name));
    if (it == obj_.end()) throw FieldError{path(name), "missing required field"};
    return *it;
  }

  const Json* optional(std::string_view name) {
    seen_.insert(std::string(name));
    auto it = obj_.find(std::string(name));
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string string(std::string_view name) {
    const Json& v = require(name);
    if (!v.is_string()) throw FieldError{path(name), "expected a string"};
    return v.get<std::string>();
  }

  double number(std::string_view name) {
    const Json& v = require(name);
    if (!v.is_number()) throw FieldError{path(name), "expected a number"};
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw FieldError{path(name), "expected a finite number"};
    return x;
  }

  int integer(std::string_view name) {
    const Json& v = require(name);
    if (!v.is_number_integer()) throw FieldError{path(name), "expected an integer"};
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) throw FieldError{path(name), "integer out of range"};
    return static_cast<int>(x);
  }

  bool boolean(std::string_view name) {
    const Json& v = require(name);
    if (!v.is_boolean()) throw FieldError{path(name), "expected a boolean"};
    return v.get<bool>();
  }

  double unit_interval(std::string_view name) {
    const double x = number(name);
    if (x < 0.0 || x > 1.0) throw FieldError{path(name), "value " + std::to_string(x) + " outside [0,1]"};
    return x;
  }

  Json extras() const {
    Json out = Json::object();
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) out[it.key()] = it.value();
    return out;
  }

 private:
  const Json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

inline Turn read_turn(const Json& j, const std::string& prefix) {
  if (!j.is_object()) throw FieldError{prefix, "expected an object"};
  RecordReader r(j, prefix);
  Turn t;
  t.turn_index = r.integer("turn_index");
  t.user_utterance = r.string("user_utterance");
  t.system_response = r.string("system_response");
  t.asr_confidence = r.unit_interval("asr_confidence");
  t.nlu_confidence = r.unit_interval("nlu_confidence");
  t.intent = r.string("intent");
  t.domain = r.string("domain");
  t.user_timestamp = r.number("user_timestamp");
  if (t.user_timestamp < 0.0) throw FieldError{r.path("user_timestamp"), "negative timestamp"};
  t.barge_in = r.boolean("barge_in");
  t.extra = r.extras();
  return t;
}

inline Dialogue read_dialogue(const Json& j) {
  if (!j.is_object()) throw FieldError{"", "record is not an object"};
  RecordReader r(j, "");
  Dialogue d;
  d.dialogue_id = r.string("dialogue_id");
  d.customer_id = r.string("customer_id");
  const std::string cohort = r.string("cohort");
  auto c = parse_cohort(cohort);
  if (!c) throw FieldError{"cohort", "unknown cohort '" + cohort + "'"};
  d.cohort = *c;
  d.application = r.string("application");
  d.multi_turn = r.boolean("multi_turn");
  const Json& turns = r.require("turns");
  if (!turns.is_array()) throw FieldError{"turns", "expected an array"};
  if (turns.empty()) throw FieldError{"turns", "dialogue has no turns"};
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const std::string prefix = "turns[" + std::to_string(i) + "]";
    Turn t = read_turn(turns[i], prefix);
    if (t.turn_index != static_cast<int>(i))
      throw FieldError{prefix + ".turn_index", "expected turn_index " + std::to_string(i)};
    if (i > 0 && t.user_timestamp < d.turns.back().user_timestamp)
      throw FieldError{prefix + ".user_timestamp", "timestamps must be non-decreasing"};
    d.turns.push_back(std::move(t));
  }
  d.extra = r.extras();
  return d;
}

inline int read_rating(RecordReader& r, std::string_view name) {
  const int v = r.integer(name);
  if (v < 1 || v > 5) throw FieldError{std::string(name), "rating " + std::to_string(v) + " outside 1..5"};
  return v;
}

inline TurnAnnotation read_annotation(const Json& j) {
  if (!j.is_object()) throw FieldError{"", "record is not an object"};
  RecordReader r(j, "");
  TurnAnnotation a;
  a.dialogue_id = r.string("dialogue_id");
  a.turn_index = r.integer("turn_index");
  if (a.turn_index < 0) throw FieldError{"turn_index", "negative turn index"};
  a.annotator_id = r.string("annotator_id");
  a.rq_rating = read_rating(r, "rq_rating");
  a.extra = r.extras();
  return a;
}

inline DialogueRating read_dialogue_rating(const Json& j) {
  if (!j.is_object()) throw FieldError{"", "record is not an object"};
  RecordReader r(j, "");
  DialogueRating d;
  d.dialogue_id = r.string("dialogue_id");
  d.rater_id = r.string("rater_id");
  d.rating = read_rating(r, "rating");
  d.extra = r.extras();
  return d;
}

template <class T, class ReadFn>
ParseResult<T> parse_lines(std::istream& in, ReadFn read) {
  ParseResult<T> result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      result.records.push_back(read(j));
    } catch (const FieldError& e) {
      result.diagnostics.push_back({line_no, e.field, e.message});
    } catch (const nlohmann::json::exception& e) {
      result.diagnostics.push_back({line_no, "", std::string("malformed record: ") + e.what()});
    }
  }
  return result;
}

inline void merge_extra(Json& out, const Json& extra) {
  for (auto it = extra.begin(); it != extra.end(); ++it) out[it.key()] = it.value();
}

}  // namespace detail

/// Reads one dialogue per line. Malformed lines become diagnostics; the
/// remaining well-formed dialogues are returned. Never throws on bad input.
inline ParseResult<Dialogue> parse_dialogues(std::istream& in) {
  auto result = detail::parse_lines<Dialogue>(in, detail::read_dialogue);
  std::set<std::string> ids;
  std::vector<Dialogue> unique;
  for (auto& d : result.records) {
    if (!ids.insert(d.dialogue_id).second) {
      result.diagnostics.push_back({0, "dialogue_id", "duplicate dialogue_id '" + d.dialogue_id + "'"});
      continue;
    }
    unique.push_back(std::move(d));
  }
  result.records = std::move(unique);
  return result;
}

/// Reads annotation lines; (dialogue_id, turn_index, annotator_id) must be unique.
inline ParseResult<TurnAnnotation> parse_annotations(std::istream& in) {
  auto result = detail::parse_lines<TurnAnnotation>(in, detail::read_annotation);
  std::set<std::tuple<std::string, int, std::string>> keys;
  std::vector<TurnAnnotation> unique;
  for (auto& a : result.records) {
    if (!keys.insert({a.dialogue_id, a.turn_index, a.annotator_id}).second) {
      result.diagnostics.push_back({0, "annotator_id", "duplicate annotation for " + a.dialogue_id + "#" +
                                                           std::to_string(a.turn_index) + " by " + a.annotator_id});
      continue;
    }
    unique.push_back(std::move(a));
  }
  result.records = std::move(unique);
  return result;
}

inline ParseResult<DialogueRating> parse_ratings(std::istream& in) {
  return detail::parse_lines<DialogueRating>(in, detail::read_dialogue_rating);
}

inline Json to_json(const Turn& t) {
  Json j = {{"turn_index", t.turn_index},         {"user_utterance", t.user_utterance},
            {"system_response", t.system_response}, {"asr_confidence", t.asr_confidence},
            {"nlu_confidence", t.nlu_confidence}, {"intent", t.intent},
            {"domain", t.domain},                 {"user_timestamp", t.user_timestamp},
            {"barge_in", t.barge_in}};
  detail::merge_extra(j, t.extra);
  return j;
}

inline Json to_json(const Dialogue& d) {
  Json turns = Json::array();
  for (const auto& t : d.turns) turns.push_back(to_json(t));
  Json j = {{"dialogue_id", d.dialogue_id}, {"customer_id", d.customer_id},
            {"cohort", to_string(d.cohort)}, {"application", d.application},
            {"multi_turn", d.multi_turn},   {"turns", std::move(turns)}};
  detail::merge_extra(j, d.extra);
  return j;
}

inline Json to_json(const TurnAnnotation& a) {
  Json j = {{"dialogue_id", a.dialogue_id}, {"turn_index", a.turn_index},
            {"annotator_id", a.annotator_id}, {"rq_rating", a.rq_rating}};
  detail::merge_extra(j, a.extra);
  return j;
}

inline Json to_json(const DialogueRating& r) {
  Json j = {{"dialogue_id", r.dialogue_id}, {"rater_id", r.rater_id}, {"rating", r.rating}};
  detail::merge_extra(j, r.extra);
  return j;
}

template <class T>
void write_lines(std::ostream& out, std::span<const T> records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

/// Mean of the annotators' ratings; nullopt marks an unlabeled turn.
inline std::optional<double> average_rq_target(std::span<const int> ratings) {
  if (ratings.empty()) return std::nullopt;
  double sum = 0.0;
  for (int r : ratings) sum += r;
  return sum / static_cast<double>(ratings.size());
}

/// Averaged RQ target per annotated turn.
inline std::map<TurnKey, double> build_turn_targets(std::span<const TurnAnnotation> annotations) {
  std::map<TurnKey, std::vector<int>> grouped;
  for (const auto& a : annotations) grouped[{a.dialogue_id, a.turn_index}].push_back(a.rq_rating);
  std::map<TurnKey, double> targets;
  for (const auto& [key, ratings] : grouped) targets[key] = *average_rq_target(ratings);
  return targets;
}

/// Mean dialogue-level rating per rated dialogue.
inline std::map<std::string, double> build_dialogue_targets(std::span<const DialogueRating> ratings) {
  std::map<std::string, std::vector<int>> grouped;
  for (const auto& r : ratings) grouped[r.dialogue_id].push_back(r.rating);
  std::map<std::string, double> out;
  for (const auto& [id, values] : grouped) out[id] = *average_rq_target(values);
  return out;
}

/// Annotations that reference turns absent from `dialogues`.
inline std::vector<Diagnostic> validate_annotations(std::span<const Dialogue> dialogues,
                                                    std::span<const TurnAnnotation> annotations) {
  std::map<std::string, std::size_t> lengths;
  for (const auto& d : dialogues) lengths[d.dialogue_id] = d.turns.size();
  std::vector<Diagnostic> out;
  for (const auto& a : annotations) {
    auto it = lengths.find(a.dialogue_id);
    if (it == lengths.end())
      out.push_back({0, "dialogue_id", "annotation references unknown dialogue '" + a.dialogue_id + "'"});
    else if (a.turn_index < 0 || static_cast<std::size_t>(a.turn_index) >= it->second)
      out.push_back({0, "turn_index", "annotation references missing turn " + a.dialogue_id + "#" +
                                          std::to_string(a.turn_index)});
  }
  return out;
}

struct SplitRatios {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

enum class Partition { train, validation, test };

struct DatasetSplit {
  std::set<std::string> train;
  std::set<std::string> validation;
  std::set<std::string> test;
  std::set<std::string> holdout_applications;

  std::optional<Partition> partition_of(const std::string& dialogue_id) const {
    if (train.count(dialogue_id)) return Partition::train;
    if (validation.count(dialogue_id)) return Partition::validation;
    if (test.count(dialogue_id)) return Partition::test;
    return std::nullopt;
  }
};

/// Dialogue-level split. Dialogues whose application is held out go to test;
/// the rest are ordered by id, shuffled with `seed` and sliced. Validation and
/// test sizes are floored, so train absorbs the rounding remainder.
inline DatasetSplit split_dataset(std::span<const Dialogue> dialogues, const SplitRatios& ratios,
                                  std::uint64_t seed, const std::set<std::string>& holdout_applications = {}) {
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative and sum to 1");
  DatasetSplit split;
  split.holdout_applications = holdout_applications;
  std::vector<std::string> eligible;
  for (const auto& d : dialogues) {
    if (holdout_applications.count(d.application))
      split.test.insert(d.dialogue_id);
    else
      eligible.push_back(d.dialogue_id);
  }
  std::sort(eligible.begin(), eligible.end());
  Rng rng(seed);
  rng.shuffle(eligible);
  const double m = static_cast<double>(eligible.size());
  const auto n_val = static_cast<std::size_t>(std::floor(ratios.validation * m + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * m + 1e-9));
  const std::size_t n_train = eligible.size() - n_val - n_test;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    if (i < n_train) split.train.insert(eligible[i]);
    else if (i < n_train + n_val) split.validation.insert(eligible[i]);
    else split.test.insert(eligible[i]);
  }
  return split;
}

/// Parses "0.6,0.2,0.2".
inline SplitRatios parse_split_ratios(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw ConfigError("bad split ratio '" + item + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("bad split ratio '" + item + "'");
    }
  }
  if (parts.size() != 3) throw ConfigError("split needs three comma-separated ratios");
  return {parts[0], parts[1], parts[2]};
}

}  // namespace usat
