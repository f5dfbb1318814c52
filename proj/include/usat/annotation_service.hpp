#pragma once

// Annotation task distribution, durable rating storage, progress/IAA
// reporting and model predictions. Transport-agnostic: http_service.hpp
// maps these calls onto HTTP routes.

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "usat/corpus.hpp"
#include "usat/dialogue_features.hpp"
#include "usat/iaa.hpp"
#include "usat/model.hpp"
#include "usat/turn_features.hpp"

namespace usat {

/// A request the service refuses; `status` is the HTTP status to report.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string message, std::string field = {})
      : std::runtime_error(std::move(message)), status(status), field(std::move(field)) {}

  Json to_json() const {
    Json j = {{"error", what()}};
    if (!field.empty()) j["field"] = field;
    return j;
  }

  int status;
  std::string field;
};

/// Append-only line-delimited log of accepted submissions. Each append is
/// flushed with fsync before it returns.
class AnnotationLog {
 public:
  struct Entry {
    TurnAnnotation annotation;
    bool overwrite = false;
  };

  explicit AnnotationLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw DataError("cannot open annotation log '" + path_.string() + "': " + std::strerror(errno));
  }

  AnnotationLog(const AnnotationLog&) = delete;
  AnnotationLog& operator=(const AnnotationLog&) = delete;
  ~AnnotationLog() {
    if (fd_ >= 0) ::close(fd_);
  }

  /// Entries in log order. A torn trailing line (crash mid-append) is
  /// skipped and reported.
  std::vector<Entry> replay(std::vector<Diagnostic>* diagnostics = nullptr) const {
    std::ifstream in(path_, std::ios::binary);
    auto parsed = detail::parse_lines<TurnAnnotation>(in, detail::read_annotation);
    if (diagnostics) diagnostics->insert(diagnostics->end(), parsed.diagnostics.begin(), parsed.diagnostics.end());
    std::vector<Entry> out;
    for (auto& a : parsed.records) {
      Entry e;
      if (auto it = a.extra.find("overwrite"); it != a.extra.end()) {
        e.overwrite = it->is_boolean() && it->get<bool>();
        a.extra.erase(it);
      }
      e.annotation = std::move(a);
      out.push_back(std::move(e));
    }
    return out;
  }

  void append(const Entry& e) {
    Json j = usat::to_json(e.annotation);
    if (e.overwrite) j["overwrite"] = true;
    const std::string line = j.dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
      const auto n = ::write(fd_, line.data() + written, line.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw DataError("annotation log write failed: " + std::string(std::strerror(errno)));
      }
      written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw DataError("annotation log fsync failed: " + std::string(std::strerror(errno)));
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

struct ServiceOptions {
  std::set<std::string> annotators;    // allowlist; empty admits anyone
  int target_annotators_per_turn = 0;  // 0: every annotator rates every turn
  std::string suggestion_model;        // turn model id for model_suggestion
  std::string default_turn_model;
  std::string default_dialogue_model;
};

enum class ModelLevel { turn, dialogue };

struct AnnotationTask {
  const Dialogue* dialogue = nullptr;
  int turn_index = 0;
  std::optional<double> model_suggestion;
};

enum class SubmitOutcome { accepted, replaced };

inline Json annotation_guidelines() {
  return {{"scale", Json::array({
                        {{"rating", 1}, {"label", "Terrible"},
                         {"description", "The system did not understand the request and did not fulfil it."}},
                        {{"rating", 2}, {"label", "Bad"},
                         {"description", "The request was understood, but nothing was done to satisfy it."}},
                        {{"rating", 3}, {"label", "OK"},
                         {"description", "The request was understood and partly satisfied, or the system explained "
                                         "how it could be fulfilled."}},
                        {{"rating", 4}, {"label", "Good"},
                         {"description", "The request was understood and satisfied, with extra information or "
                                         "extra turns along the way."}},
                        {{"rating", 5}, {"label", "Excellent"},
                         {"description", "The request was understood and satisfied completely and efficiently."}},
                    })},
          {"instructions", "Read the whole conversation, then rate the system response of the highlighted turn."}};
}

class AnnotationService {
 public:
  AnnotationService(std::vector<Dialogue> dialogues, const std::filesystem::path& log_path, ServiceOptions options = {},
                    PopularityTable table = {}, Lexicon lexicon = default_lexicon())
      : dialogues_(std::move(dialogues)),
        options_(std::move(options)),
        table_(std::move(table)),
        lexicon_(std::move(lexicon)),
        log_(log_path) {
    if (options_.target_annotators_per_turn < 0) throw ConfigError("target annotators per turn must be >= 0");
    std::sort(dialogues_.begin(), dialogues_.end(),
              [](const Dialogue& a, const Dialogue& b) { return a.dialogue_id < b.dialogue_id; });
    for (std::size_t i = 0; i < dialogues_.size(); ++i) {
      if (i > 0 && dialogues_[i].dialogue_id == dialogues_[i - 1].dialogue_id)
        throw DataError("duplicate dialogue_id '" + dialogues_[i].dialogue_id + "'");
      for (const auto& t : dialogues_[i].turns) order_.push_back({{dialogues_[i].dialogue_id, t.turn_index}, i});
    }
    for (const auto& e : log_.replay(&replay_diagnostics_)) {
      if (!lookup(e.annotation.dialogue_id, e.annotation.turn_index)) {
        replay_diagnostics_.push_back({0, "dialogue_id", "logged annotation for unknown turn " +
                                                             e.annotation.dialogue_id + "#" +
                                                             std::to_string(e.annotation.turn_index)});
        continue;
      }
      apply(e.annotation, e.overwrite);
    }
  }

  void register_model(const std::string& id, TrainedModel model, ModelLevel level) {
    std::unique_lock lock(mutex_);
    models_[id] = {std::move(model), level};
  }

  /// Lowest (dialogue_id, turn_index) this annotator has not rated and that
  /// still needs raters; nullopt when none remain.
  std::optional<AnnotationTask> next_task(const std::string& annotator) const {
    check_annotator(annotator);
    std::shared_lock lock(mutex_);
    const auto target = static_cast<std::size_t>(options_.target_annotators_per_turn);
    for (const auto& [key, di] : order_) {
      auto it = ratings_.find(key);
      if (it != ratings_.end()) {
        if (it->second.count(annotator)) continue;
        if (target > 0 && it->second.size() >= target) continue;
      }
      AnnotationTask task{&dialogues_[di], key.turn_index, std::nullopt};
      if (!options_.suggestion_model.empty()) {
        auto m = models_.find(options_.suggestion_model);
        if (m != models_.end() && m->second.level == ModelLevel::turn)
          task.model_suggestion = predict_turn(m->second.model, *task.dialogue, static_cast<std::size_t>(key.turn_index));
      }
      return task;
    }
    return std::nullopt;
  }

  SubmitOutcome submit(const TurnAnnotation& a, bool overwrite = false) {
    check_annotator(a.annotator_id);
    if (a.annotator_id.empty()) throw ServiceError(400, "annotator_id must be non-empty", "annotator_id");
    if (a.rq_rating < 1 || a.rq_rating > 5) throw ServiceError(400, "rq_rating must be an integer in 1..5", "rq_rating");
    if (!lookup(a.dialogue_id, a.turn_index))
      throw ServiceError(404, "unknown turn " + a.dialogue_id + "#" + std::to_string(a.turn_index));
    std::unique_lock lock(mutex_);
    const bool exists = has(a);
    if (exists && !overwrite)
      throw ServiceError(409, "annotator '" + a.annotator_id + "' already rated " + a.dialogue_id + "#" +
                                  std::to_string(a.turn_index));
    TurnAnnotation clean{a.dialogue_id, a.turn_index, a.annotator_id, a.rq_rating, Json::object()};
    log_.append({clean, overwrite});
    apply(clean, overwrite);
    return exists ? SubmitOutcome::replaced : SubmitOutcome::accepted;
  }

  /// Current ratings ordered by (dialogue_id, turn_index, annotator_id), in
  /// the annotation file format.
  std::vector<TurnAnnotation> export_annotations() const {
    std::shared_lock lock(mutex_);
    std::vector<TurnAnnotation> out;
    for (const auto& [key, by] : ratings_)
      for (const auto& [annotator, rating] : by) out.push_back({key.dialogue_id, key.turn_index, annotator, rating, Json::object()});
    return out;
  }

  Json progress() const {
    const auto annotations = export_annotations();
    std::shared_lock lock(mutex_);
    Json counts = Json::object();
    std::map<std::string, std::size_t> per_annotator;
    for (const auto& a : annotations) ++per_annotator[a.annotator_id];
    for (const auto& [id, n] : per_annotator) counts[id] = n;
    for (const auto& id : options_.annotators)
      if (!counts.contains(id)) counts[id] = 0;

    std::map<std::size_t, std::size_t> coverage;
    for (const auto& [key, di] : order_) {
      auto it = ratings_.find(key);
      ++coverage[it == ratings_.end() ? 0 : it->second.size()];
    }
    Json cov = Json::object();
    for (const auto& [k, n] : coverage) cov[std::to_string(k)] = n;

    const auto report = iaa_spearman(annotations);
    Json pairs = Json::array();
    for (const auto& p : report.pairs)
      pairs.push_back({{"annotators", {p.annotator_a, p.annotator_b}},
                       {"n_items", p.n_items},
                       {"spearman", std::isnan(p.value) ? Json(nullptr) : Json(p.value)}});
    Json diagnostics = report.diagnostics;
    return {{"turns_total", order_.size()},
            {"annotations_total", annotations.size()},
            {"per_annotator", std::move(counts)},
            {"coverage", std::move(cov)},
            {"iaa",
             {{"statistic", "mean pairwise spearman"},
              {"value", report.defined() ? Json(report.mean) : Json(nullptr)},
              {"pairs", std::move(pairs)},
              {"diagnostics", std::move(diagnostics)}}}};
  }

  Json task_json(const AnnotationTask& task) const {
    Json j = {{"dialogue_id", task.dialogue->dialogue_id},
              {"turn_index", task.turn_index},
              {"dialogue", usat::to_json(*task.dialogue)},
              {"guidelines", annotation_guidelines()}};
    if (task.model_suggestion) j["model_suggestion"] = *task.model_suggestion;
    return j;
  }

  /// Stateless prediction for one dialogue record. Body fields: "dialogue"
  /// (record), optional "turn_model" and "dialogue_model" ids.
  Json predict(const Json& body) const {
    if (!body.is_object()) throw ServiceError(400, "request body must be an object");
    if (!body.contains("dialogue")) throw ServiceError(400, "missing field", "dialogue");
    Dialogue d;
    try {
      d = detail::read_dialogue(body.at("dialogue"));
    } catch (const detail::FieldError& e) {
      throw ServiceError(400, e.message, "dialogue." + e.field);
    } catch (const nlohmann::json::exception& e) {
      throw ServiceError(400, e.what(), "dialogue");
    }
    auto model_id = [&](const char* field, const std::string& fallback) -> std::string {
      if (!body.contains(field)) return fallback;
      if (!body[field].is_string()) throw ServiceError(400, "must be a string", field);
      return body[field].get<std::string>();
    };
    const std::string turn_id = model_id("turn_model", options_.default_turn_model);
    const std::string dialogue_id = model_id("dialogue_model", options_.default_dialogue_model);
    if (turn_id.empty() && dialogue_id.empty()) throw ServiceError(400, "no model requested and no default model configured");

    std::shared_lock lock(mutex_);
    const TrainedModel* turn_model = turn_id.empty() ? nullptr : &find_model(turn_id, ModelLevel::turn, "turn_model");
    const TrainedModel* dlg_model =
        dialogue_id.empty() ? nullptr : &find_model(dialogue_id, ModelLevel::dialogue, "dialogue_model");

    Json out = {{"dialogue_id", d.dialogue_id}};
    try {
      if (turn_model) {
        Json ratings = Json::array();
        for (std::size_t n = 0; n < d.turns.size(); ++n) ratings.push_back(predict_turn(*turn_model, d, n));
        out["turn_model"] = turn_id;
        out["turn_ratings"] = std::move(ratings);
      }
      if (dlg_model) {
        out["dialogue_model"] = dialogue_id;
        out["dialogue_rating"] = predict_dialogue(*dlg_model, d, turn_model);
      }
    } catch (const SchemaMismatch& e) {
      throw ServiceError(400, std::string("schema mismatch: ") + e.what(), "schema");
    }
    return out;
  }

  /// Clipped prediction for turn n; the model's features are looked up by name.
  double predict_turn(const TrainedModel& model, const Dialogue& d, std::size_t n) const {
    const auto cols = turn_schema().locate(model.feature_names);
    const auto all = TurnFeaturizer{table_, lexicon_}.full(d, n);
    std::vector<double> x(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) x[j] = all[cols[j]];
    return model.predict(x);
  }

  double predict_dialogue(const TrainedModel& model, const Dialogue& d, const TrainedModel* turn_model) const {
    const bool needs_rating = std::find(model.feature_names.begin(), model.feature_names.end(),
                                        "avg_predicted_turn_rating") != model.feature_names.end();
    if (needs_rating && !turn_model)
      throw ServiceError(400, "dialogue model needs avg_predicted_turn_rating; supply turn_model", "turn_model");
    const auto v = featurize_dialogue(d, table_, lexicon_, needs_rating ? turn_model : nullptr);
    const auto cols = dialogue_schema(needs_rating).locate(model.feature_names);
    std::vector<double> x(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) x[j] = v.values[cols[j]];
    return model.predict(x);
  }

  const std::vector<Diagnostic>& replay_diagnostics() const { return replay_diagnostics_; }
  std::size_t turn_count() const { return order_.size(); }

 private:
  struct Registered {
    TrainedModel model;
    ModelLevel level = ModelLevel::turn;
  };

  void check_annotator(const std::string& annotator) const {
    if (annotator.empty()) throw ServiceError(400, "annotator id is required", "annotator");
    if (!options_.annotators.empty() && !options_.annotators.count(annotator))
      throw ServiceError(403, "annotator '" + annotator + "' is not on the allowlist", "annotator");
  }

  const Dialogue* lookup(const std::string& dialogue_id, int turn_index) const {
    auto it = std::lower_bound(dialogues_.begin(), dialogues_.end(), dialogue_id,
                               [](const Dialogue& d, const std::string& id) { return d.dialogue_id < id; });
    if (it == dialogues_.end() || it->dialogue_id != dialogue_id) return nullptr;
    if (turn_index < 0 || static_cast<std::size_t>(turn_index) >= it->turns.size()) return nullptr;
    return &*it;
  }

  bool has(const TurnAnnotation& a) const {
    auto it = ratings_.find({a.dialogue_id, a.turn_index});
    return it != ratings_.end() && it->second.count(a.annotator_id);
  }

  // Caller holds the write lock (or is the constructor).
  void apply(const TurnAnnotation& a, bool overwrite) {
    auto& by = ratings_[{a.dialogue_id, a.turn_index}];
    if (by.count(a.annotator_id) && !overwrite) return;
    by[a.annotator_id] = a.rq_rating;
  }

  const TrainedModel& find_model(const std::string& id, ModelLevel level, const char* field) const {
    auto it = models_.find(id);
    if (it == models_.end()) throw ServiceError(404, "unknown model '" + id + "'", field);
    if (it->second.level != level) throw ServiceError(400, "model '" + id + "' has the wrong level", field);
    return it->second.model;
  }

  std::vector<Dialogue> dialogues_;  // sorted by id
  std::vector<std::pair<TurnKey, std::size_t>> order_;
  ServiceOptions options_;
  PopularityTable table_;
  Lexicon lexicon_;
  AnnotationLog log_;
  std::map<TurnKey, std::map<std::string, int>> ratings_;
  std::map<std::string, Registered> models_;
  std::vector<Diagnostic> replay_diagnostics_;
  mutable std::shared_mutex mutex_;
};

}  // namespace usat
