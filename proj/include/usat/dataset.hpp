#pragma once

// Named feature layouts and labeled feature matrices.

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "usat/corpus.hpp"
#include "usat/errors.hpp"
#include "usat/matrix.hpp"

namespace usat {

/// Feature-set labels used by the turn-level schema (the ablation unit).
namespace feature_set {
inline constexpr const char* paraphrase = "paraphrase";
inline constexpr const char* cohesion = "cohesion";
inline constexpr const char* popularity = "popularity";
inline constexpr const char* unactionable = "unactionable";
inline constexpr const char* diversity = "diversity";
inline constexpr const char* baseline = "baseline";
// Dialogue-level blocks.
inline constexpr const char* aggregate = "aggregate";
inline constexpr const char* turn_rating = "turn_rating";
}  // namespace feature_set

/// Ordered feature names, each tagged with exactly one feature-set label.
class FeatureSchema {
 public:
  FeatureSchema() = default;

  void add(std::string name, std::string set) {
    if (index_.count(name)) throw ConfigError("duplicate feature name '" + name + "'");
    index_[name] = names_.size();
    names_.push_back(std::move(name));
    sets_.push_back(std::move(set));
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const std::string& set_of(std::size_t i) const { return sets_[i]; }

  std::optional<std::size_t> index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Distinct labels in first-appearance order.
  std::vector<std::string> sets() const {
    std::vector<std::string> out;
    for (const auto& s : sets_)
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    return out;
  }

  /// Column indices of features whose label is not in `removed`.
  std::vector<std::size_t> columns_without(const std::set<std::string>& removed) const {
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < size(); ++i)
      if (!removed.count(sets_[i])) cols.push_back(i);
    return cols;
  }

  FeatureSchema select(std::span<const std::size_t> cols) const {
    FeatureSchema out;
    for (auto c : cols) out.add(names_[c], sets_[c]);
    return out;
  }

  /// Column of each of `names` in this schema; throws SchemaMismatch on a miss.
  std::vector<std::size_t> locate(std::span<const std::string> names) const {
    std::vector<std::size_t> cols;
    for (const auto& n : names) {
      auto i = index_of(n);
      if (!i) throw SchemaMismatch("feature '" + n + "' not present in schema");
      cols.push_back(*i);
    }
    return cols;
  }

  friend bool operator==(const FeatureSchema& a, const FeatureSchema& b) {
    return a.names_ == b.names_ && a.sets_ == b.sets_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::string> sets_;
  std::map<std::string, std::size_t> index_;
};

struct FeatureVector {
  std::vector<double> values;
  std::string dialogue_id;
  int turn_index = 0;
};

/// Rows of features with optional regression targets and row metadata.
struct FeatureMatrix {
  FeatureSchema schema;
  Matrix X;
  std::vector<double> y;     // empty when unlabeled
  std::vector<TurnKey> keys;  // turn_index is -1 for dialogue-level rows

  std::size_t rows() const { return X.rows(); }
  bool labeled() const { return !y.empty(); }

  void append(std::span<const double> values, TurnKey key) {
    if (values.size() != schema.size()) throw SchemaMismatch("row length does not match schema");
    X.append_row(values);
    keys.push_back(std::move(key));
  }

  FeatureMatrix select_rows(std::span<const std::size_t> rows) const {
    FeatureMatrix out;
    out.schema = schema;
    out.X = X.select_rows(rows);
    if (labeled()) out.y = select<double>(y, rows);
    out.keys = select<TurnKey>(keys, rows);
    return out;
  }

  FeatureMatrix without_sets(const std::set<std::string>& removed) const {
    const auto cols = schema.columns_without(removed);
    FeatureMatrix out;
    out.schema = schema.select(cols);
    out.X = X.select_cols(cols);
    out.y = y;
    out.keys = keys;
    return out;
  }

  /// Reorders/subsets columns to `names`.
  FeatureMatrix project(std::span<const std::string> names) const {
    const auto cols = schema.locate(names);
    FeatureMatrix out;
    out.schema = schema.select(cols);
    out.X = X.select_cols(cols);
    out.y = y;
    out.keys = keys;
    return out;
  }
};

namespace detail {
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
}  // namespace detail

/// CSV: dialogue_id, [turn_index], schema columns, [label column].
inline void write_csv(std::ostream& out, const FeatureMatrix& m, bool with_turn_index = true,
                      const std::string& label_column = "target") {
  out << "dialogue_id";
  if (with_turn_index) out << ",turn_index";
  for (const auto& n : m.schema.names()) out << ',' << detail::csv_field(n);
  if (m.labeled()) out << ',' << label_column;
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << detail::csv_field(m.keys[r].dialogue_id);
    if (with_turn_index) out << ',' << m.keys[r].turn_index;
    for (double v : m.X.row(r)) out << ',' << detail::format_double(v);
    if (m.labeled()) out << ',' << detail::format_double(m.y[r]);
    out << '\n';
  }
}

}  // namespace usat
