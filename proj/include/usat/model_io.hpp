#pragma once

// Model files: one JSON document with top-level fields
//   format_version, kind, schema, hyperparams, parameters, importances, clip_range
// Doubles are written in shortest round-trip form, so a loaded model
// predicts bit-identically to the saved one.

#include <istream>
#include <ostream>
#include <string>

#include "usat/corpus.hpp"
#include "usat/model.hpp"

namespace usat {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline Json tree_to_json(const RegressionTree& t) {
  Json nodes = Json::array();
  for (const auto& n : t.nodes)
    nodes.push_back(Json::array({n.feature, n.threshold, n.left, n.right, n.value, n.n_samples, n.gain}));
  return nodes;
}

inline RegressionTree tree_from_json(const Json& j) {
  RegressionTree t;
  for (const auto& row : j) {
    TreeNode n;
    n.feature = row.at(0).get<int>();
    n.threshold = row.at(1).get<double>();
    n.left = row.at(2).get<int>();
    n.right = row.at(3).get<int>();
    n.value = row.at(4).get<double>();
    n.n_samples = row.at(5).get<std::uint32_t>();
    n.gain = row.at(6).get<double>();
    t.nodes.push_back(n);
  }
  const auto count = static_cast<int>(t.nodes.size());
  if (count == 0) throw DataError("empty tree in model file");
  for (const auto& n : t.nodes)
    if (!n.is_leaf() && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count))
      throw DataError("tree node references a missing child");
  return t;
}

inline Json hyperparams_to_json(const ModelConfig& c) {
  return {{"lasso", {{"alpha", c.lasso.alpha}, {"tol", c.lasso.tol}, {"max_sweeps", c.lasso.max_sweeps}}},
          {"tree",
           {{"max_depth", c.tree.max_depth},
            {"min_samples_leaf", c.tree.min_samples_leaf},
            {"min_samples_split", c.tree.min_samples_split}}},
          {"ensemble",
           {{"n_trees", c.ensemble.n_trees},
            {"learning_rate", c.ensemble.learning_rate},
            {"feature_fraction", c.ensemble.feature_fraction},
            {"bootstrap", c.ensemble.bootstrap},
            {"seed", c.ensemble.seed}}}};
}

inline ModelConfig hyperparams_from_json(ModelKind kind, const Json& j) {
  ModelConfig c;
  c.kind = kind;
  c.lasso.alpha = j.at("lasso").at("alpha").get<double>();
  c.lasso.tol = j.at("lasso").at("tol").get<double>();
  c.lasso.max_sweeps = j.at("lasso").at("max_sweeps").get<int>();
  c.tree.max_depth = j.at("tree").at("max_depth").get<int>();
  c.tree.min_samples_leaf = j.at("tree").at("min_samples_leaf").get<int>();
  c.tree.min_samples_split = j.at("tree").at("min_samples_split").get<int>();
  c.ensemble.n_trees = j.at("ensemble").at("n_trees").get<int>();
  c.ensemble.learning_rate = j.at("ensemble").at("learning_rate").get<double>();
  c.ensemble.feature_fraction = j.at("ensemble").at("feature_fraction").get<double>();
  c.ensemble.bootstrap = j.at("ensemble").at("bootstrap").get<bool>();
  c.ensemble.seed = j.at("ensemble").at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace detail

inline Json model_to_json(const TrainedModel& m) {
  Json params = Json::object();
  if (m.kind == ModelKind::lasso) {
    params = {{"intercept", m.lasso.intercept},
              {"coefficients", m.lasso.coefficients},
              {"standardized_coefficients", m.lasso.standardized},
              {"means", m.lasso.means},
              {"scales", m.lasso.scales},
              {"sweeps", m.lasso.sweeps},
              {"converged", m.lasso.converged}};
  } else {
    Json trees = Json::array();
    for (const auto& t : m.trees) trees.push_back(detail::tree_to_json(t));
    params = {{"base_score", m.base_score}, {"learning_rate", m.learning_rate}, {"trees", std::move(trees)}};
  }
  Json importances = Json::object();
  for (std::size_t i = 0; i < m.feature_names.size(); ++i)
    importances[m.feature_names[i]] = i < m.importances.size() ? m.importances[i] : 0.0;
  return {{"format_version", kModelFormatVersion},
          {"kind", to_string(m.kind)},
          {"schema", m.feature_names},
          {"hyperparams", detail::hyperparams_to_json(m.config)},
          {"parameters", std::move(params)},
          {"importances", std::move(importances)},
          {"clip_range", {m.clip_low, m.clip_high}}};
}

inline TrainedModel model_from_json(const Json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw VersionMismatch("model format_version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kModelFormatVersion) + ")");
    TrainedModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.feature_names = j.at("schema").get<std::vector<std::string>>();
    m.config = detail::hyperparams_from_json(m.kind, j.at("hyperparams"));
    const Json& p = j.at("parameters");
    const std::size_t width = m.feature_names.size();
    if (m.kind == ModelKind::lasso) {
      m.lasso.intercept = p.at("intercept").get<double>();
      m.lasso.coefficients = p.at("coefficients").get<std::vector<double>>();
      m.lasso.standardized = p.at("standardized_coefficients").get<std::vector<double>>();
      m.lasso.means = p.at("means").get<std::vector<double>>();
      m.lasso.scales = p.at("scales").get<std::vector<double>>();
      m.lasso.sweeps = p.at("sweeps").get<int>();
      m.lasso.converged = p.at("converged").get<bool>();
      if (m.lasso.coefficients.size() != width) throw DataError("coefficient count does not match schema");
    } else {
      m.base_score = p.at("base_score").get<double>();
      m.learning_rate = p.at("learning_rate").get<double>();
      for (const auto& t : p.at("trees")) {
        m.trees.push_back(detail::tree_from_json(t));
        for (const auto& n : m.trees.back().nodes)
          if (n.feature >= static_cast<int>(width)) throw DataError("tree splits on a feature outside the schema");
      }
      if (m.trees.empty() && m.kind != ModelKind::gbm) throw DataError("model has no trees");
    }
    const Json& imp = j.at("importances");
    for (const auto& name : m.feature_names) m.importances.push_back(imp.at(name).get<double>());
    m.clip_low = j.at("clip_range").at(0).get<double>();
    m.clip_high = j.at("clip_range").at(1).get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid model file: ") + e.what());
  }
}

inline void save_model(const TrainedModel& m, std::ostream& out) { out << model_to_json(m).dump(1) << '\n'; }

inline TrainedModel load_model(std::istream& in) {
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace usat
