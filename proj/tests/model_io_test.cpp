#include <gtest/gtest.h>

#include <sstream>

#include "usat/model_io.hpp"

using namespace usat;

namespace {
struct Data {
  Matrix X;
  std::vector<double> y;
};

Data sample_data(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  Data d{Matrix(n, p), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double s = 3.0;
    for (std::size_t j = 0; j < p; ++j) {
      d.X(i, j) = rng.normal(0, 1) / 3.0;
      s += d.X(i, j) * (j + 1) * 0.4;
    }
    d.y[i] = s + rng.normal(0, 0.2);
  }
  return d;
}

TrainedModel round_trip(const TrainedModel& m) {
  std::stringstream buf;
  save_model(m, buf);
  return load_model(buf);
}

std::vector<TrainedModel> every_kind(const Data& d) {
  EnsembleHyperparams e;
  e.n_trees = 12;
  e.seed = 77;
  return {fit_lasso(d.X, d.y, {0.01, 1e-9, 10000}), fit_tree(d.X, d.y, {5, 2, 4}),
          fit_forest(d.X, d.y, {5, 2, 4}, e), fit_gbm(d.X, d.y, {3, 2, 4}, e)};
}
}  // namespace

TEST(ModelIo, RoundTripPredictsBitIdentically) {
  const auto d = sample_data(150, 4, 1);
  const auto probe = sample_data(500, 4, 2);
  for (const auto& m : every_kind(d)) {
    const auto back = round_trip(m);
    EXPECT_EQ(back.kind, m.kind);
    EXPECT_EQ(back.feature_names, m.feature_names);
    EXPECT_EQ(back.config, m.config);
    EXPECT_EQ(back.importances, m.importances);
    const auto a = m.predict(probe.X), b = back.predict(probe.X);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]) << to_string(m.kind) << " row " << i;
    for (std::size_t i = 0; i < probe.X.rows(); ++i)
      ASSERT_EQ(m.predict_raw(probe.X.row(i)), back.predict_raw(probe.X.row(i)));
    // Saving the loaded model reproduces the file byte for byte.
    std::stringstream first, second;
    save_model(m, first);
    save_model(back, second);
    EXPECT_EQ(first.str(), second.str());
  }
}

TEST(ModelIo, FileCarriesTopLevelFields) {
  const auto d = sample_data(60, 2, 3);
  const auto j = model_to_json(fit_tree(d.X, d.y, {3, 2, 4}));
  for (const char* key : {"format_version", "kind", "schema", "hyperparams", "parameters", "importances", "clip_range"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["kind"], "tree");
  EXPECT_EQ(j["clip_range"], Json::array({1.0, 5.0}));
}

TEST(ModelIo, VersionMismatchIsRejected) {
  const auto d = sample_data(60, 2, 4);
  auto j = model_to_json(fit_tree(d.X, d.y, {3, 2, 4}));
  j["format_version"] = kModelFormatVersion + 1;
  EXPECT_THROW(model_from_json(j), VersionMismatch);
}

TEST(ModelIo, CorruptFilesAreDataErrors) {
  std::stringstream junk("{\"format_version\": 1");
  EXPECT_THROW(load_model(junk), DataError);
  const auto d = sample_data(60, 2, 5);
  auto j = model_to_json(fit_tree(d.X, d.y, {3, 2, 4}));
  j["parameters"]["trees"][0][0][2] = 999;
  EXPECT_THROW(model_from_json(j), DataError);
  j = model_to_json(fit_tree(d.X, d.y, {3, 2, 4}));
  j.erase("importances");
  EXPECT_THROW(model_from_json(j), DataError);
  j = model_to_json(fit_tree(d.X, d.y, {3, 2, 4}));
  j["kind"] = "svr";
  EXPECT_THROW(model_from_json(j), ConfigError);
}

TEST(ModelIo, SchemaMismatchAtPredictTime) {
  const auto d = sample_data(80, 3, 6);
  FeatureMatrix fm;
  for (const char* n : {"asr_confidence", "cohesion", "unactionable"}) fm.schema.add(n, "baseline");
  fm.X = d.X;
  fm.y = d.y;
  fm.keys.assign(80, {"d", 0});
  const auto m = round_trip(fit_model(ModelConfig::turn_level(ModelKind::tree), fm));
  EXPECT_NO_THROW(m.predict(fm));
  auto swapped = fm.project(std::vector<std::string>{"cohesion", "asr_confidence", "unactionable"});
  EXPECT_THROW(m.predict(swapped), SchemaMismatch);
  auto narrower = fm.project(std::vector<std::string>{"cohesion", "asr_confidence"});
  EXPECT_THROW(m.predict(narrower), SchemaMismatch);
  EXPECT_THROW(m.predict(narrower.X), SchemaMismatch);
}
