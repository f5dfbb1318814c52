#pragma once

// Machine-readable (JSON, CSV) and human-readable renderings of evaluation
// results.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "usat/corpus.hpp"
#include "usat/evaluation.hpp"
#include "usat/iaa.hpp"

namespace usat {

namespace detail {
inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string with_ci(const MetricReport& r) {
  if (!r.valid) return fixed(r.point) + " (no CI)";
  return fixed(r.point) + " [" + fixed(r.ci_low) + ", " + fixed(r.ci_high) + "]";
}
}  // namespace detail

inline Json to_json(const MetricReport& r) {
  Json j = {{"metric", r.metric},
            {"point", detail::number_or_null(r.point)},
            {"ci_low", detail::number_or_null(r.ci_low)},
            {"ci_high", detail::number_or_null(r.ci_high)},
            {"n", r.n},
            {"n_resamples", r.n_resamples},
            {"seed", r.seed},
            {"n_undefined", r.n_undefined},
            {"valid", r.valid}};
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  return j;
}

inline Json to_json(const PartitionReport& p) {
  return {{"partition", p.partition},
          {"n", p.n},
          {"correlation", to_json(p.correlation)},
          {"f_dissatisfactory", to_json(p.f_dissatisfactory)},
          {"accuracy", to_json(p.accuracy)}};
}

inline Json to_json(const std::vector<PartitionReport>& parts) {
  Json j = Json::array();
  for (const auto& p : parts) j.push_back(to_json(p));
  return j;
}

inline Json to_json(const IaaReport& r) {
  Json pairs = Json::array();
  for (const auto& p : r.pairs)
    pairs.push_back({{"annotator_a", p.annotator_a},
                     {"annotator_b", p.annotator_b},
                     {"n_items", p.n_items},
                     {"value", detail::number_or_null(p.value)}});
  return {{"statistic", r.statistic},
          {"mean", detail::number_or_null(r.mean)},
          {"pairs", std::move(pairs)},
          {"diagnostics", r.diagnostics}};
}

inline void print_partition_table(std::ostream& out, const std::vector<PartitionReport>& parts) {
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %6s  %-28s %-28s %-28s\n", "partition", "n", "correlation",
                "f_dissatisfactory", "accuracy");
  out << line;
  for (const auto& p : parts) {
    std::snprintf(line, sizeof line, "%-22s %6zu  %-28s %-28s %-28s\n", p.partition.c_str(), p.n,
                  detail::with_ci(p.correlation).c_str(), detail::with_ci(p.f_dissatisfactory).c_str(),
                  detail::with_ci(p.accuracy).c_str());
    out << line;
  }
}

/// Long format: one line per (partition, metric).
inline void write_partition_csv(std::ostream& out, const std::vector<PartitionReport>& parts,
                                const std::string& prefix_header = {}, const std::string& prefix_value = {}) {
  auto row = [&](const PartitionReport& p, const MetricReport& r) {
    if (!prefix_value.empty()) out << prefix_value << ',';
    out << p.partition << ',' << p.n << ',' << r.metric << ',' << detail::format_double(r.point) << ','
        << detail::format_double(r.ci_low) << ',' << detail::format_double(r.ci_high) << ',' << (r.valid ? 1 : 0)
        << '\n';
  };
  if (!prefix_header.empty()) out << prefix_header << ',';
  out << "partition,n,metric,point,ci_low,ci_high,valid\n";
  for (const auto& p : parts) {
    row(p, p.correlation);
    row(p, p.f_dissatisfactory);
    row(p, p.accuracy);
  }
}

inline Json to_json(const std::vector<AblationRow>& rows) {
  Json j = Json::array();
  for (const auto& r : rows) j.push_back({{"removed", r.removed}, {"features", r.features}, {"partitions", to_json(r.partitions)}});
  return j;
}

inline void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  bool header = true;
  for (const auto& r : rows) {
    std::ostringstream block;
    write_partition_csv(block, r.partitions, "removed", r.removed);
    std::string text = block.str();
    if (!header) text = text.substr(text.find('\n') + 1);
    out << text;
    header = false;
  }
}

/// Rows: removed set; columns: correlation per partition.
inline void print_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows) {
  if (rows.empty()) return;
  out << "removed";
  for (const auto& p : rows.front().partitions) out << " | " << p.partition << " r / F-dis";
  out << '\n';
  for (const auto& r : rows) {
    out << r.removed;
    for (const auto& p : r.partitions)
      out << " | " << detail::fixed(p.correlation.point) << " / " << detail::fixed(p.f_dissatisfactory.point);
    out << '\n';
  }
}

}  // namespace usat
