// usat: satisfaction-estimation pipeline driver.
//
// Exit codes: 0 success, 1 runtime/data error, 2 usage/config error.
//
// Seeds: the split uses --seed directly; ensemble models use
// derive_seed(seed, 1), bootstrap intervals derive_seed(seed, 2) and
// cross-validation derive_seed(seed, 3).

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "usat/dialogue_features.hpp"
#include "usat/evaluation.hpp"
#include "usat/http_service.hpp"
#include "usat/iaa.hpp"
#include "usat/io.hpp"
#include "usat/model_io.hpp"
#include "usat/pipeline.hpp"
#include "usat/reports.hpp"
#include "usat/synth.hpp"

namespace fs = std::filesystem;
using namespace usat;

namespace {

enum Stream : std::uint64_t { kModelSeed = 1, kBootstrapSeed = 2, kCvSeed = 3 };

struct Options {
  // inputs
  std::string corpus, annotations, ratings, lexicon;
  std::string model_in, model_out, turn_model;
  std::string out;
  std::uint64_t seed = 0;
  std::string split = "0.6,0.2,0.2";
  std::vector<std::string> holdout_apps;
  std::vector<std::string> drop_sets;
  double smoothing = 1.0;

  // model
  std::string model_kind = "gbm";
  double alpha = 0.0;
  int max_depth = 0, min_samples_leaf = 0, min_samples_split = 0;
  int n_trees = 100;
  double learning_rate = 0.1, feature_fraction = 1.0 / 3.0;
  bool no_bootstrap = false;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* depth_opt = nullptr;
  CLI::Option* leaf_opt = nullptr;
  CLI::Option* split_opt = nullptr;

  // evaluation
  int n_resamples = 1000;
  double level = 0.95;
  int cv_folds = 0;
  double cv_holdout = 0.1;
  std::string predictions;
  std::string feature_level = "turn";

  // synth
  SynthConfig synth;

  // iaa
  std::string boundary_marks;

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string log_path = "annotations.log.jsonl";
  std::string static_dir;
  std::string dialogue_model;
  std::vector<std::string> annotators;
  int target_per_turn = 0;
  bool suggest = false;
};

void add_data_options(CLI::App* cmd, Options& o, bool need_annotations, bool need_ratings) {
  cmd->add_option("--corpus", o.corpus, "dialogue records, one JSON object per line")->required()->check(CLI::ExistingFile);
  auto* ann = cmd->add_option("--annotations", o.annotations, "turn annotations (JSONL)")->check(CLI::ExistingFile);
  if (need_annotations) ann->required();
  auto* rat = cmd->add_option("--ratings", o.ratings, "dialogue ratings (JSONL)")->check(CLI::ExistingFile);
  if (need_ratings) rat->required();
  cmd->add_option("--lexicon", o.lexicon, "unactionable phrase list (default: built-in)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "seed for the split and every stochastic step")->required();
  cmd->add_option("--split", o.split, "train,validation,test ratios")->capture_default_str();
  cmd->add_option("--holdout-app", o.holdout_apps, "application tag kept out of train/validation (repeatable)");
  cmd->add_option("--smoothing", o.smoothing, "popularity smoothing constant k")->capture_default_str();
}

void add_model_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--model-kind", o.model_kind, "lasso|tree|forest|gbm")->capture_default_str();
  o.alpha_opt = cmd->add_option("--alpha", o.alpha, "lasso penalty");
  o.depth_opt = cmd->add_option("--max-depth", o.max_depth, "tree max depth");
  o.leaf_opt = cmd->add_option("--min-samples-leaf", o.min_samples_leaf, "tree min samples per leaf");
  o.split_opt = cmd->add_option("--min-samples-split", o.min_samples_split, "tree min samples to split");
  cmd->add_option("--n-trees", o.n_trees, "forest/gbm tree count")->capture_default_str();
  cmd->add_option("--learning-rate", o.learning_rate, "gbm learning rate")->capture_default_str();
  cmd->add_option("--feature-fraction", o.feature_fraction, "forest per-split feature fraction")->capture_default_str();
  cmd->add_flag("--no-bootstrap", o.no_bootstrap, "forest: fit every tree on the full sample");
  cmd->add_option("--drop-set", o.drop_sets, "feature set to leave out (repeatable)");
}

void add_bootstrap_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--n-resamples", o.n_resamples, "bootstrap resamples")->capture_default_str();
  cmd->add_option("--ci-level", o.level, "bootstrap confidence level")->capture_default_str();
}

ModelConfig model_config(const Options& o, bool dialogue_level) {
  const ModelKind kind = parse_model_kind(o.model_kind);
  ModelConfig c = dialogue_level ? ModelConfig::dialogue_level(kind) : ModelConfig::turn_level(kind);
  if (o.alpha_opt && o.alpha_opt->count()) c.lasso.alpha = o.alpha;
  if (o.depth_opt && o.depth_opt->count()) c.tree.max_depth = o.max_depth;
  if (o.leaf_opt && o.leaf_opt->count()) c.tree.min_samples_leaf = o.min_samples_leaf;
  if (o.split_opt && o.split_opt->count()) c.tree.min_samples_split = o.min_samples_split;
  c.ensemble.n_trees = o.n_trees;
  c.ensemble.learning_rate = o.learning_rate;
  c.ensemble.feature_fraction = o.feature_fraction;
  c.ensemble.bootstrap = !o.no_bootstrap;
  c.ensemble.seed = derive_seed(o.seed, kModelSeed);
  c.lasso.validate();
  c.tree.validate();
  c.ensemble.validate();
  return c;
}

BootstrapOptions bootstrap_options(const Options& o) {
  if (o.n_resamples < 1) throw ConfigError("--n-resamples must be >= 1");
  if (!(o.level > 0.0 && o.level < 1.0)) throw ConfigError("--ci-level must be in (0,1)");
  return {o.n_resamples, o.level, derive_seed(o.seed, kBootstrapSeed)};
}

PipelineConfig pipeline_config(const Options& o) {
  PipelineConfig pc;
  pc.ratios = parse_split_ratios(o.split);
  pc.seed = o.seed;
  pc.holdout_applications = {o.holdout_apps.begin(), o.holdout_apps.end()};
  pc.smoothing = o.smoothing;
  if (!(pc.smoothing >= 0.0)) throw ConfigError("--smoothing must be >= 0");
  return pc;
}

template <class T>
std::vector<T> keep_records(ParseResult<T> parsed, const std::string& path) {
  for (const auto& d : parsed.diagnostics) std::cerr << "warning: " << path << ": " << d.str() << '\n';
  if (parsed.records.empty() && !parsed.diagnostics.empty())
    throw DataError(path + ": no well-formed records");
  return std::move(parsed.records);
}

struct Inputs {
  Corpus corpus;
  Lexicon lexicon;
};

Inputs load_inputs(const Options& o) {
  Inputs in;
  in.corpus.dialogues = keep_records(read_dialogues(o.corpus), o.corpus);
  if (in.corpus.dialogues.empty()) throw DataError(o.corpus + ": corpus is empty");
  if (!o.annotations.empty()) {
    in.corpus.annotations = keep_records(read_annotations(o.annotations), o.annotations);
    for (const auto& d : validate_annotations(in.corpus.dialogues, in.corpus.annotations))
      std::cerr << "warning: " << o.annotations << ": " << d.str() << '\n';
  }
  if (!o.ratings.empty()) in.corpus.ratings = keep_records(read_ratings(o.ratings), o.ratings);
  in.lexicon = o.lexicon.empty() ? default_lexicon() : read_lexicon(o.lexicon);
  return in;
}

TrainedModel load_model_file(const std::string& path) {
  auto in = open_input(path);
  return load_model(in);
}

void save_model_file(const TrainedModel& m, const std::string& path) {
  write_atomically(path, [&](std::ostream& out) { save_model(m, out); });
}

/// Report goes to --out (atomically) when given; the table always goes to stdout.
void emit_json(const Options& o, const Json& report) {
  if (!o.out.empty()) write_text_atomically(o.out, report.dump(2) + "\n");
}

void emit_csv_beside(const Options& o, const std::function<void(std::ostream&)>& fill) {
  if (o.out.empty()) return;
  fs::path csv = o.out;
  csv.replace_extension(".csv");
  write_atomically(csv, fill);
}

bool is_dialogue_model(const TrainedModel& m) {
  for (const auto& name : m.feature_names)
    if (!turn_schema().index_of(name)) return true;
  return false;
}

bool needs_turn_rating(const TrainedModel& m) {
  return std::find(m.feature_names.begin(), m.feature_names.end(), "avg_predicted_turn_rating") !=
         m.feature_names.end();
}

std::set<std::string> drop_set(const Options& o) {
  std::set<std::string> drop(o.drop_sets.begin(), o.drop_sets.end());
  return drop;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const Options& o) {
  if (o.out.empty()) throw ConfigError("--out directory is required");
  const Corpus c = synthesize_corpus(o.synth, o.seed);
  const fs::path dir = o.out;
  write_atomically(dir / "dialogues.jsonl", [&](std::ostream& out) { write_lines<Dialogue>(out, c.dialogues); });
  write_atomically(dir / "annotations.jsonl",
                   [&](std::ostream& out) { write_lines<TurnAnnotation>(out, c.annotations); });
  write_atomically(dir / "ratings.jsonl", [&](std::ostream& out) { write_lines<DialogueRating>(out, c.ratings); });
  std::cout << "wrote " << c.dialogues.size() << " dialogues, " << c.turn_count() << " turns, "
            << c.annotations.size() << " annotations, " << c.ratings.size() << " dialogue ratings to " << dir.string()
            << '\n';
  return 0;
}

// ---------------------------------------------------------------- featurize

int cmd_featurize(const Options& o) {
  if (o.out.empty()) throw ConfigError("--out directory is required");
  if (o.feature_level != "turn" && o.feature_level != "dialogue" && o.feature_level != "both")
    throw ConfigError("--level must be turn, dialogue or both");
  const Inputs in = load_inputs(o);
  const PipelineConfig pc = pipeline_config(o);
  const DatasetSplit split = split_dataset(in.corpus.dialogues, pc.ratios, pc.seed, pc.holdout_applications);
  const PopularityTable table = training_popularity(in.corpus, split, pc.smoothing);
  const fs::path dir = o.out;
  write_text_atomically(dir / "popularity.json", table.to_json().dump(2) + "\n");

  const std::pair<const char*, const std::set<std::string>*> parts[] = {
      {"train", &split.train}, {"validation", &split.validation}, {"test", &split.test}};
  const auto drop = drop_set(o);
  if (o.feature_level != "dialogue") {
    const auto targets = build_turn_targets(in.corpus.annotations);
    const auto* t = in.corpus.annotations.empty() ? nullptr : &targets;
    for (const auto& [name, ids] : parts) {
      const auto m = build_turn_matrix(dialogues_in(in.corpus, *ids), table, in.lexicon, t).without_sets(drop);
      write_atomically(dir / (std::string("turn_") + name + ".csv"), [&](std::ostream& out) { write_csv(out, m); });
      std::cout << "turn " << name << ": " << m.rows() << " rows x " << m.schema.size() << " features\n";
    }
  }
  if (o.feature_level != "turn") {
    std::optional<TrainedModel> turn_model;
    if (!o.turn_model.empty()) turn_model = load_model_file(o.turn_model);
    const auto targets = build_dialogue_targets(in.corpus.ratings);
    const auto* t = in.corpus.ratings.empty() ? nullptr : &targets;
    for (const auto& [name, ids] : parts) {
      const auto m = build_dialogue_matrix(dialogues_in(in.corpus, *ids), table, in.lexicon,
                                           turn_model ? &*turn_model : nullptr, t);
      write_atomically(dir / (std::string("dialogue_") + name + ".csv"),
                       [&](std::ostream& out) { write_csv(out, m, false, "rating"); });
      std::cout << "dialogue " << name << ": " << m.rows() << " rows x " << m.schema.size() << " features\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------- training

Json model_summary(const TrainedModel& m) {
  Json imp = Json::array();
  const auto report = feature_importance(m);
  for (const auto& [name, score] : report.ranked) imp.push_back({{"feature", name}, {"importance", score}});
  return {{"kind", to_string(m.kind)}, {"n_features", m.feature_names.size()}, {"no_signal", report.no_signal},
          {"importances", std::move(imp)}};
}

void print_importances(const TrainedModel& m, std::size_t top = 10) {
  const auto report = feature_importance(m);
  if (report.no_signal) {
    std::cout << "feature importance: no signal\n";
    return;
  }
  std::cout << "top features:\n";
  for (std::size_t i = 0; i < std::min(top, report.ranked.size()); ++i)
    std::cout << "  " << report.ranked[i].first << "  " << detail::fixed(report.ranked[i].second) << '\n';
}

int cmd_train_turn(const Options& o) {
  if (o.model_out.empty()) throw ConfigError("--model-out is required");
  const Inputs in = load_inputs(o);
  const auto config = model_config(o, false);
  const auto boot = bootstrap_options(o);
  const auto ds = prepare_turn_datasets(in.corpus, in.lexicon, pipeline_config(o));
  const auto drop = drop_set(o);
  const auto train = ds.train.without_sets(drop);
  if (train.rows() == 0) throw DataError("no labeled turns in the training split");
  const TrainedModel model = fit_model(config, train);
  save_model_file(model, o.model_out);

  Json report = {{"level", "turn"}, {"train_rows", train.rows()}, {"model", model_summary(model)}};
  const auto val = ds.validation.without_sets(drop);
  if (val.rows() > 0) {
    const auto parts = evaluate_partitions(model, val, ds.validation_partitions, boot);
    report["validation"] = to_json(parts);
    std::cout << "validation (" << val.rows() << " turns):\n";
    print_partition_table(std::cout, parts);
  }
  print_importances(model);
  emit_json(o, report);
  return 0;
}

int cmd_train_dialogue(const Options& o) {
  if (o.model_out.empty()) throw ConfigError("--model-out is required");
  const Inputs in = load_inputs(o);
  const auto config = model_config(o, true);
  const auto boot = bootstrap_options(o);
  std::optional<TrainedModel> turn_model;
  if (!o.turn_model.empty()) {
    turn_model = load_model_file(o.turn_model);
    if (is_dialogue_model(*turn_model)) throw ConfigError("--turn-model is not a turn-level model");
  }
  const auto ds = prepare_dialogue_datasets(in.corpus, in.lexicon, pipeline_config(o), turn_model ? &*turn_model : nullptr);
  const auto drop = drop_set(o);
  const auto train = ds.train.without_sets(drop);
  if (train.rows() == 0) throw DataError("no rated dialogues in the training split");
  const TrainedModel model = fit_dialogue_model(train, config.kind, &config);
  save_model_file(model, o.model_out);

  Json report = {{"level", "dialogue"}, {"train_rows", train.rows()}, {"model", model_summary(model)}};
  const auto val = ds.validation.without_sets(drop);
  if (val.rows() > 0) {
    const auto parts = evaluate_partitions(model, val, ds.validation_partitions, boot);
    report["validation"] = to_json(parts);
    std::cout << "validation (" << val.rows() << " dialogues):\n";
    print_partition_table(std::cout, parts);
  }
  if (o.cv_folds > 0) {
    // Cross-validation over every rated dialogue, as in the dialogue-level protocol.
    FeatureMatrix all = ds.train;
    for (const auto* m : {&ds.validation, &ds.test})
      for (std::size_t r = 0; r < m->rows(); ++r) {
        all.append(m->X.row(r), m->keys[r]);
        all.y.push_back(m->y[r]);
      }
    all = all.without_sets(drop);
    CvOptions cv;
    cv.k = o.cv_folds;
    cv.holdout_fraction = o.cv_holdout;
    cv.seed = derive_seed(o.seed, kCvSeed);
    cv.bootstrap = boot;
    const auto res = kfold_cv(all, [&](const FeatureMatrix& f) { return fit_model(config, f); }, cv);
    Json pooled = Json::array(), held = Json::array();
    std::cout << cv.k << "-fold cross-validation (" << res.cv_rows.size() << " dialogues, " << res.holdout_rows.size()
              << " held out):\n";
    for (const auto& r : res.pooled) {
      pooled.push_back(to_json(r));
      std::cout << "  cv " << r.metric << " " << detail::with_ci(r) << '\n';
    }
    for (const auto& r : res.holdout) {
      held.push_back(to_json(r));
      std::cout << "  holdout " << r.metric << " " << detail::with_ci(r) << '\n';
    }
    report["cross_validation"] = {{"k", cv.k}, {"pooled", pooled}, {"holdout", held}};
  }
  print_importances(model);
  emit_json(o, report);
  return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const Options& o) {
  if (o.model_in.empty()) throw ConfigError("--model-in is required");
  const Inputs in = load_inputs(o);
  const auto boot = bootstrap_options(o);
  const TrainedModel model = load_model_file(o.model_in);
  const PipelineConfig pc = pipeline_config(o);
  FeatureMatrix test;
  RowPartitions partitions;
  std::string level;
  if (is_dialogue_model(model)) {
    level = "dialogue";
    std::optional<TrainedModel> turn_model;
    if (needs_turn_rating(model)) {
      if (o.turn_model.empty()) throw ConfigError("this dialogue model needs --turn-model");
      turn_model = load_model_file(o.turn_model);
    }
    if (in.corpus.ratings.empty()) throw ConfigError("dialogue-level evaluation needs --ratings");
    auto ds = prepare_dialogue_datasets(in.corpus, in.lexicon, pc, turn_model ? &*turn_model : nullptr);
    test = ds.test.project(model.feature_names);
    partitions = std::move(ds.test_partitions);
  } else {
    level = "turn";
    if (in.corpus.annotations.empty()) throw ConfigError("turn-level evaluation needs --annotations");
    auto ds = prepare_turn_datasets(in.corpus, in.lexicon, pc);
    test = ds.test.project(model.feature_names);
    partitions = std::move(ds.test_partitions);
  }
  const auto parts = evaluate_partitions(model, test, partitions, boot);
  std::cout << level << "-level " << to_string(model.kind) << " on the test split (" << test.rows() << " rows):\n";
  print_partition_table(std::cout, parts);
  if (!o.predictions.empty()) {
    const auto pred = model.predict(test);
    write_atomically(o.predictions, [&](std::ostream& out) {
      out << "dialogue_id,turn_index,target,prediction\n";
      for (std::size_t r = 0; r < test.rows(); ++r)
        out << detail::csv_field(test.keys[r].dialogue_id) << ',' << test.keys[r].turn_index << ','
            << detail::format_double(test.y[r]) << ',' << detail::format_double(pred[r]) << '\n';
    });
  }
  emit_json(o, {{"level", level}, {"model", to_string(model.kind)}, {"partitions", to_json(parts)}});
  emit_csv_beside(o, [&](std::ostream& out) { write_partition_csv(out, parts); });
  return 0;
}

// ---------------------------------------------------------------- ablate

int cmd_ablate(const Options& o) {
  const Inputs in = load_inputs(o);
  const auto config = model_config(o, false);
  const auto boot = bootstrap_options(o);
  const auto ds = prepare_turn_datasets(in.corpus, in.lexicon, pipeline_config(o));
  if (ds.train.rows() == 0) throw DataError("no labeled turns in the training split");
  auto sets = ds.train.schema.sets();
  std::vector<std::string> removable;
  for (const auto& s : sets)
    if (s != feature_set::baseline) removable.push_back(s);
  const auto rows = ablation_study(ds.train, ds.test, ds.test_partitions, removable, config, boot);
  std::cout << "turn-level ablation, " << to_string(config.kind) << " (test split, correlation / F-dissatisfactory):\n";
  print_ablation_table(std::cout, rows);
  emit_json(o, {{"model", to_string(config.kind)}, {"rows", to_json(rows)}});
  emit_csv_beside(o, [&](std::ostream& out) { write_ablation_csv(out, rows); });
  return 0;
}

// ---------------------------------------------------------------- iaa

int cmd_iaa(const Options& o) {
  const auto annotations = keep_records(read_annotations(o.annotations), o.annotations);
  const auto report = iaa_spearman(annotations);
  Json out = {{"turn_rq", to_json(report)}};
  std::cout << "annotators: mean pairwise Spearman rho = " << detail::fixed(report.mean) << " over "
            << report.pairs.size() << " pairs\n";
  for (const auto& p : report.pairs)
    std::cout << "  " << p.annotator_a << " / " << p.annotator_b << "  n=" << p.n_items << "  rho=" << detail::fixed(p.value)
              << '\n';
  for (const auto& d : report.diagnostics) std::cout << "  note: " << d << '\n';

  if (!o.ratings.empty()) {
    // Mean annotated RQ per dialogue against the user's own dialogue rating.
    std::map<std::string, std::pair<double, int>> sums;
    for (const auto& a : annotations) {
      sums[a.dialogue_id].first += a.rq_rating;
      ++sums[a.dialogue_id].second;
    }
    std::map<TurnKey, double> mean_rq, user;
    for (const auto& [id, s] : sums) mean_rq[{id, -1}] = s.first / s.second;
    for (const auto& [id, r] : build_dialogue_targets(keep_records(read_ratings(o.ratings), o.ratings))) user[{id, -1}] = r;
    const auto rc = annotation_user_correlation(mean_rq, user);
    std::cout << "mean RQ vs user rating over " << rc.n_items << " dialogues: pearson " << detail::fixed(rc.pearson)
              << ", spearman " << detail::fixed(rc.spearman) << '\n';
    out["rq_vs_user_rating"] = {{"n_items", rc.n_items},
                                {"pearson", detail::number_or_null(rc.pearson)},
                                {"spearman", detail::number_or_null(rc.spearman)},
                                {"diagnostics", rc.diagnostics}};
  }
  if (!o.boundary_marks.empty()) {
    auto in = open_input(o.boundary_marks);
    std::vector<BoundaryMark> marks;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const Json j = Json::parse(line);
        marks.push_back({j.at("item_id").get<std::string>(), j.at("annotator_id").get<std::string>(),
                         j.at("label").get<int>()});
      } catch (const nlohmann::json::exception& e) {
        throw DataError(o.boundary_marks + ": line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    const auto kappa = iaa_kappa(marks);
    std::cout << "boundary marks: mean pairwise Cohen's kappa = " << detail::fixed(kappa.mean) << '\n';
    out["boundary_kappa"] = to_json(kappa);
  }
  emit_json(o, out);
  return 0;
}

// ---------------------------------------------------------------- report

int cmd_report(const Options& o) {
  const Inputs in = load_inputs(o);
  const std::set<std::string> holdout(o.holdout_apps.begin(), o.holdout_apps.end());
  auto partition_of = [&](const Dialogue& d) {
    if (holdout.count(d.application)) return std::string(kHeldOut);
    return std::string(d.multi_turn ? kMultiTurn : kSingleTurn);
  };
  std::map<std::string, const Dialogue*> by_id;
  for (const auto& d : in.corpus.dialogues) by_id[d.dialogue_id] = &d;

  std::map<std::pair<std::string, std::string>, std::vector<double>> values;  // (level, partition)
  for (const auto& [key, target] : build_turn_targets(in.corpus.annotations)) {
    auto it = by_id.find(key.dialogue_id);
    if (it != by_id.end()) values[{"turn", partition_of(*it->second)}].push_back(target);
  }
  for (const auto& [id, rating] : build_dialogue_targets(in.corpus.ratings)) {
    auto it = by_id.find(id);
    if (it != by_id.end()) values[{"dialogue", partition_of(*it->second)}].push_back(rating);
  }
  std::ostringstream csv;
  csv << "level,partition,rating,count\n";
  for (const auto& [k, v] : values) {
    const auto h = rating_histogram(v);
    std::cout << k.first << " / " << k.second << ":";
    for (int r = 1; r <= 5; ++r) {
      csv << k.first << ',' << k.second << ',' << r << ',' << h[static_cast<std::size_t>(r - 1)] << '\n';
      std::cout << "  " << r << ":" << h[static_cast<std::size_t>(r - 1)];
    }
    std::cout << '\n';
  }
  if (!o.out.empty()) write_text_atomically(o.out, csv.str());
  return 0;
}

// ---------------------------------------------------------------- serve

std::atomic<httplib::Server*> g_server{nullptr};

extern "C" void stop_server(int) {
  if (auto* s = g_server.load()) s->stop();
}

int cmd_serve(const Options& o) {
  const Inputs in = load_inputs(o);
  const PipelineConfig pc = pipeline_config(o);
  const DatasetSplit split = split_dataset(in.corpus.dialogues, pc.ratios, pc.seed, pc.holdout_applications);
  ServiceOptions so;
  so.annotators = {o.annotators.begin(), o.annotators.end()};
  so.target_annotators_per_turn = o.target_per_turn;
  if (!o.turn_model.empty()) so.default_turn_model = "turn";
  if (!o.dialogue_model.empty()) so.default_dialogue_model = "dialogue";
  if (o.suggest) {
    if (o.turn_model.empty()) throw ConfigError("--suggest needs --turn-model");
    so.suggestion_model = "turn";
  }
  AnnotationService service(in.corpus.dialogues, o.log_path, so, training_popularity(in.corpus, split, pc.smoothing),
                            in.lexicon);
  for (const auto& d : service.replay_diagnostics()) std::cerr << "warning: " << o.log_path << ": " << d.str() << '\n';
  if (!o.turn_model.empty()) service.register_model("turn", load_model_file(o.turn_model), ModelLevel::turn);
  if (!o.dialogue_model.empty())
    service.register_model("dialogue", load_model_file(o.dialogue_model), ModelLevel::dialogue);

  httplib::Server server;
  mount_routes(server, service, o.static_dir);
  int port = o.port;
  if (port == 0) {
    port = server.bind_to_any_port(o.host);
    if (port < 0) throw DataError("cannot bind " + o.host);
  } else if (!server.bind_to_port(o.host, port)) {
    throw DataError("cannot bind " + o.host + ":" + std::to_string(port));
  }
  std::cout << "listening on http://" << o.host << ':' << port << "  (" << service.turn_count() << " turns)"
            << std::endl;
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  server.listen_after_bind();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"User satisfaction estimation: synthesize, featurize, train, evaluate and annotate"};
  app.set_config("--config", "", "read options from a TOML/INI file; flags override it");
  app.require_subcommand(1);
  app.fallthrough(false);

  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic corpus");
  synth->add_option("--seed", o.seed, "generator seed")->required();
  synth->add_option("--out", o.out, "output directory")->required();
  synth->add_option("--n-dialogues", o.synth.n_dialogues)->capture_default_str();
  synth->add_option("--min-turns", o.synth.min_turns)->capture_default_str();
  synth->add_option("--max-turns", o.synth.max_turns)->capture_default_str();
  synth->add_option("--n-domains", o.synth.n_domains)->capture_default_str();
  synth->add_option("--n-intents", o.synth.n_intents)->capture_default_str();
  synth->add_option("--n-annotators", o.synth.n_annotators)->capture_default_str();
  synth->add_option("--n-customers", o.synth.n_customers)->capture_default_str();
  synth->add_option("--noise-sigma", o.synth.noise_sigma)->capture_default_str();
  synth->add_option("--zipf-exponent", o.synth.zipf_exponent)->capture_default_str();
  synth->add_option("--multi-turn-fraction", o.synth.multi_turn_fraction)->capture_default_str();
  synth->add_option("--new-app-fraction", o.synth.new_application_fraction)->capture_default_str();

  auto* featurize = app.add_subcommand("featurize", "write feature matrices (CSV) for each split partition");
  add_data_options(featurize, o, false, false);
  featurize->add_option("--level", o.feature_level, "turn|dialogue|both")->capture_default_str();
  featurize->add_option("--turn-model", o.turn_model, "turn model for avg_predicted_turn_rating")->check(CLI::ExistingFile);
  featurize->add_option("--drop-set", o.drop_sets, "turn feature set to leave out (repeatable)");
  featurize->add_option("--out", o.out, "output directory")->required();

  auto* train_turn = app.add_subcommand("train-turn", "fit a turn-level model on the train split");
  add_data_options(train_turn, o, true, false);
  add_model_options(train_turn, o);
  add_bootstrap_options(train_turn, o);
  train_turn->add_option("--model-out", o.model_out, "model file to write")->required();
  train_turn->add_option("--out", o.out, "validation report (JSON)");

  auto* train_dialogue = app.add_subcommand("train-dialogue", "fit a dialogue-level model on the train split");
  add_data_options(train_dialogue, o, false, true);
  add_model_options(train_dialogue, o);
  add_bootstrap_options(train_dialogue, o);
  train_dialogue->add_option("--turn-model", o.turn_model, "turn model adding avg_predicted_turn_rating")
      ->check(CLI::ExistingFile);
  train_dialogue->add_option("--cv-folds", o.cv_folds, "also run k-fold CV over all rated dialogues (0: off)");
  train_dialogue->add_option("--cv-holdout", o.cv_holdout, "fraction held out from CV")->capture_default_str();
  train_dialogue->add_option("--model-out", o.model_out, "model file to write")->required();
  train_dialogue->add_option("--out", o.out, "validation report (JSON)");

  auto* eval = app.add_subcommand("eval", "evaluate a saved model on the test split per partition");
  add_data_options(eval, o, false, false);
  add_bootstrap_options(eval, o);
  eval->add_option("--model-in", o.model_in, "model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--turn-model", o.turn_model, "turn model for dialogue models that need it")->check(CLI::ExistingFile);
  eval->add_option("--predictions", o.predictions, "write per-row predictions (CSV)");
  eval->add_option("--out", o.out, "report (JSON; a CSV is written beside it)");

  auto* ablate = app.add_subcommand("ablate", "retrain without each turn feature set");
  add_data_options(ablate, o, true, false);
  add_model_options(ablate, o);
  add_bootstrap_options(ablate, o);
  ablate->add_option("--out", o.out, "report (JSON; a CSV is written beside it)");

  auto* iaa = app.add_subcommand("iaa", "inter-annotator agreement");
  iaa->add_option("--annotations", o.annotations, "turn annotations (JSONL)")->required()->check(CLI::ExistingFile);
  iaa->add_option("--ratings", o.ratings, "dialogue ratings to correlate with mean RQ")->check(CLI::ExistingFile);
  iaa->add_option("--boundary-marks", o.boundary_marks, "JSONL {item_id, annotator_id, label} for Cohen's kappa")
      ->check(CLI::ExistingFile);
  iaa->add_option("--out", o.out, "report (JSON)");

  auto* report = app.add_subcommand("report", "rating histograms per partition (CSV)");
  report->add_option("--corpus", o.corpus)->required()->check(CLI::ExistingFile);
  report->add_option("--annotations", o.annotations)->check(CLI::ExistingFile);
  report->add_option("--ratings", o.ratings)->check(CLI::ExistingFile);
  report->add_option("--holdout-app", o.holdout_apps, "application tag reported as its own partition");
  report->add_option("--out", o.out, "CSV output");

  auto* serve = app.add_subcommand("serve", "run the annotation and prediction service");
  add_data_options(serve, o, false, false);
  serve->add_option("--host", o.host)->capture_default_str();
  serve->add_option("--port", o.port, "0 picks a free port")->capture_default_str();
  serve->add_option("--log", o.log_path, "append-only annotation log")->capture_default_str();
  serve->add_option("--static", o.static_dir, "directory of UI assets served at /")->check(CLI::ExistingDirectory);
  serve->add_option("--turn-model", o.turn_model, "turn model registered as 'turn'")->check(CLI::ExistingFile);
  serve->add_option("--dialogue-model", o.dialogue_model, "dialogue model registered as 'dialogue'")
      ->check(CLI::ExistingFile);
  serve->add_option("--annotator", o.annotators, "allowed annotator id (repeatable; default: anyone)");
  serve->add_option("--target-per-turn", o.target_per_turn, "annotators wanted per turn (0: all)");
  serve->add_flag("--suggest", o.suggest, "attach the turn model's prediction to tasks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*featurize) return cmd_featurize(o);
    if (*train_turn) return cmd_train_turn(o);
    if (*train_dialogue) return cmd_train_dialogue(o);
    if (*eval) return cmd_eval(o);
    if (*ablate) return cmd_ablate(o);
    if (*iaa) return cmd_iaa(o);
    if (*report) return cmd_report(o);
    if (*serve) return cmd_serve(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
