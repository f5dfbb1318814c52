#pragma once

// Seeded synthetic corpora with a planted satisfaction signal.
//
// Generation (all draws from one Rng(seed), in dialogue then turn order):
//
//   dialogue   customer ~ Zipf(n_customers, zipf_exponent); cohort novice with
//              p = 0.45; tagged with the held-out application ("new-app") with
//              p = new_application_fraction, otherwise multi_turn with
//              p = multi_turn_fraction (new-app dialogues are always
//              multi-turn); length ~ U{min_turns..max_turns}.
//   turn       after an unactionable turn the user repeats the previous intent
//              with p = 0.5, otherwise with p = 0.08; else intent rank
//              ~ Zipf(n_intents, zipf_exponent) (new-app: Zipf over its own
//              new_application_intents). Intent i lives in domain i mod n_domains.
//              asr ~ N(0.85, 0.10), nlu ~ N(0.80, 0.12), both clamped to
//              [0.05, 1]. unactionable with p = 0.18 (new-app: 0.30).
//              barge_in with p = 0.1. Responses end in '?' with p = 0.2.
//              Response length ~ U{8..14} tokens regardless of outcome, with
//              0..3 tokens echoed from the request, so response length and
//              request/response cohesion carry no signal.
//
// Planted latent satisfaction per turn (PlantedSignal defaults):
//
//   s* = clamp(3.9 - 8.0 max(0, 0.8 - asr) - 2.0 unactionable - 1.0 repeat
//              + 0.8 [popularity >= 0.5], 1, 5)
//
//   repeat     = 1 iff the intent equals the previous turn's intent
//   popularity = 1 - log(1 + rank) / log(1 + pool size), rank being the
//                intent's Zipf rank within its pool
//
// So the unactionable, paraphrase, popularity and baseline (asr) feature sets
// carry signal; cohesion does not. Each of n_annotators emits
// round(clamp(s* + N(0, noise_sigma), 1, 5)); the dialogue's user rating is
// round(clamp(mean_turn_s* + N(0, noise_sigma), 1, 5)). s* is stored in each
// turn's "latent_satisfaction" field and the dialogue mean in the dialogue's.
//
// With noise_sigma = 0.5 and the default config, the mean pairwise annotator
// Spearman rho over 5000+ turns is kRecordedIaaAtHalfSigma.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "usat/corpus.hpp"
#include "usat/errors.hpp"
#include "usat/rng.hpp"

namespace usat {

struct PlantedSignal {
  double intercept = 3.9;
  double asr_knee = 0.8;
  double asr_slope = 8.0;
  double unactionable = -2.0;
  double repeat = -1.0;
  double popular_bonus = 0.8;
  double popular_cutoff = 0.5;

  double operator()(double asr_confidence, bool unactionable_turn, bool repeated_intent, double pop) const {
    const double s = intercept - asr_slope * std::max(0.0, asr_knee - asr_confidence) +
                     (unactionable_turn ? unactionable : 0.0) + (repeated_intent ? repeat : 0.0) +
                     (pop >= popular_cutoff ? popular_bonus : 0.0);
    return std::clamp(s, 1.0, 5.0);
  }
};

struct SynthConfig {
  std::size_t n_dialogues = 2000;
  int min_turns = 1;
  int max_turns = 5;
  std::size_t n_domains = 26;
  std::size_t n_intents = 120;
  std::size_t n_annotators = 3;
  double noise_sigma = 0.5;
  double zipf_exponent = 1.1;
  std::size_t n_customers = 500;
  double multi_turn_fraction = 0.3;
  double new_application_fraction = 0.0;
  std::size_t new_application_intents = 12;
  PlantedSignal signal;

  void validate() const {
    if (n_dialogues < 1 || n_domains < 1 || n_intents < 1 || n_annotators < 1 || n_customers < 1 ||
        new_application_intents < 1)
      throw ConfigError("synth counts must be >= 1");
    if (min_turns < 1 || max_turns < min_turns) throw ConfigError("turn range must satisfy 1 <= min <= max");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
    if (!(zipf_exponent >= 0.0)) throw ConfigError("zipf_exponent must be >= 0");
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(multi_turn_fraction) || !prob(new_application_fraction))
      throw ConfigError("fractions must lie in [0,1]");
  }
};

inline constexpr const char* kNewApplication = "new-app";
inline constexpr const char* kLatentField = "latent_satisfaction";

/// Mean pairwise annotator Spearman rho measured on
/// synthesize_corpus({n_dialogues = 2000, noise_sigma = 0.5}, seed = 7).
inline constexpr double kRecordedIaaAtHalfSigma = 0.701230;

namespace detail {

inline const std::vector<std::string>& request_filler() {
  static const std::vector<std::string> words = {
      "please", "can", "you", "the",   "my",    "for",  "to",     "now",   "what", "is",
      "set",    "get", "play", "show", "find",  "tell", "me",     "about", "some", "next",
      "today",  "on",  "a",    "with", "from",  "this", "that",   "new",   "up",   "again"};
  return words;
}

inline const std::vector<std::string>& response_filler() {
  static const std::vector<std::string> words = {
      "ok",      "result",  "item",   "option",  "list",  "update", "info",    "detail",
      "entry",   "summary", "status", "content", "track", "record", "message", "reply"};
  return words;
}

inline const std::vector<std::vector<std::string>>& unactionable_prefixes() {
  static const std::vector<std::vector<std::string>> p = {{"sorry", "i", "don't", "know"},
                                                          {"i", "can't", "help", "with"},
                                                          {"i", "didn't", "understand"},
                                                          {"i'm", "not", "sure"}};
  return p;
}

inline const std::vector<std::vector<std::string>>& actionable_prefixes() {
  static const std::vector<std::vector<std::string>> p = {
      {"here", "is", "what", "turned", "up"}, {"alright", "done"}, {"playing", "it", "now"},
      {"you", "got", "it"}, {"here", "you", "go"}};
  return p;
}

inline std::size_t token_count(const std::vector<std::string>& words) {
  std::size_t n = 0;
  for (const auto& w : words) n += 1 + static_cast<std::size_t>(std::count(w.begin(), w.end(), '\''));
  return n;
}

inline std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

inline std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

inline int round_rating(double x) { return static_cast<int>(std::floor(std::clamp(x, 1.0, 5.0) + 0.5)); }

}  // namespace detail

inline Corpus synthesize_corpus(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const ZipfSampler customers(cfg.n_customers, cfg.zipf_exponent);
  const ZipfSampler intents(cfg.n_intents, cfg.zipf_exponent);
  const ZipfSampler new_app_intents(cfg.new_application_intents, cfg.zipf_exponent);
  const auto& req_words = detail::request_filler();
  const auto& resp_words = detail::response_filler();

  Corpus corpus;
  char buf[64];
  for (std::size_t di = 0; di < cfg.n_dialogues; ++di) {
    Dialogue d;
    std::snprintf(buf, sizeof buf, "dlg-%06zu", di);
    d.dialogue_id = buf;
    std::snprintf(buf, sizeof buf, "cust-%04zu", customers(rng));
    d.customer_id = buf;
    d.cohort = rng.bernoulli(0.45) ? Cohort::novice : Cohort::experienced;
    const bool new_app = rng.bernoulli(cfg.new_application_fraction);
    d.multi_turn = new_app || rng.bernoulli(cfg.multi_turn_fraction);
    const int n_turns =
        cfg.min_turns + static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.max_turns - cfg.min_turns + 1)));

    double t_clock = 0.0, s_sum = 0.0;
    std::size_t prev_rank = 0;
    bool prev_failed = false;
    std::vector<std::string> prev_keywords;
    for (int k = 0; k < n_turns; ++k) {
      Turn t;
      t.turn_index = k;
      const bool repeat_attempt = k > 0 && rng.bernoulli(prev_failed ? 0.5 : 0.08);
      const std::size_t pool = new_app ? cfg.new_application_intents : cfg.n_intents;
      const std::size_t rank = repeat_attempt ? prev_rank : (new_app ? new_app_intents(rng) : intents(rng));
      const bool repeated = k > 0 && rank == prev_rank;
      if (new_app) {
        std::snprintf(buf, sizeof buf, "NewApp.Intent%02zu", rank);
        t.intent = buf;
        t.domain = "NewApp";
      } else {
        std::snprintf(buf, sizeof buf, "Intent%03zu", rank);
        t.intent = buf;
        std::snprintf(buf, sizeof buf, "Domain%02zu", rank % cfg.n_domains);
        t.domain = buf;
      }
      const double popularity =
          1.0 - std::log1p(static_cast<double>(rank)) / std::log1p(static_cast<double>(pool));

      t.asr_confidence = std::clamp(rng.normal(0.85, 0.10), 0.05, 1.0);
      t.nlu_confidence = std::clamp(rng.normal(0.80, 0.12), 0.05, 1.0);
      const bool failed = rng.bernoulli(new_app ? 0.30 : 0.18);
      t.barge_in = rng.bernoulli(0.1);

      // User request: two intent keywords plus 1..5 filler words.
      std::vector<std::string> request;
      if (repeated && !prev_keywords.empty()) {
        request = prev_keywords;
      } else {
        std::snprintf(buf, sizeof buf, "%s%zu", new_app ? "nk" : "kw", rank);
        request = {std::string(buf) + "a", std::string(buf) + "b"};
      }
      prev_keywords = request;
      const auto n_fill = 1 + rng.index(5);
      for (std::uint64_t i = 0; i < n_fill; ++i) request.push_back(req_words[rng.index(req_words.size())]);
      t.user_utterance = detail::capitalized(detail::join(request)) + ".";

      // System response of fixed-distribution length.
      const auto& prefixes = failed ? detail::unactionable_prefixes() : detail::actionable_prefixes();
      std::vector<std::string> response = prefixes[rng.index(prefixes.size())];
      const auto n_echo = rng.index(4);
      for (std::uint64_t i = 0; i < n_echo; ++i) response.push_back(request[rng.index(request.size())]);
      const std::size_t target_len = 8 + rng.index(7);
      while (detail::token_count(response) < target_len) response.push_back(resp_words[rng.index(resp_words.size())]);
      t.system_response = detail::capitalized(detail::join(response)) + (rng.bernoulli(0.2) ? "?" : ".");

      t.user_timestamp = t_clock;
      t_clock += 2.0 + rng.exponential(6.0);

      const double s = cfg.signal(t.asr_confidence, failed, repeated, popularity);
      t.extra[kLatentField] = s;
      s_sum += s;
      for (std::size_t a = 0; a < cfg.n_annotators; ++a) {
        std::snprintf(buf, sizeof buf, "ann-%02zu", a);
        corpus.annotations.push_back(
            {d.dialogue_id, k, buf, detail::round_rating(s + rng.normal(0.0, cfg.noise_sigma)), Json::object()});
      }
      prev_rank = rank;
      prev_failed = failed;
      if (k == 0) d.application = new_app ? std::string(kNewApplication) : t.domain;
      d.turns.push_back(std::move(t));
    }
    const double s_mean = s_sum / static_cast<double>(n_turns);
    d.extra[kLatentField] = s_mean;
    corpus.ratings.push_back(
        {d.dialogue_id, d.customer_id, detail::round_rating(s_mean + rng.normal(0.0, cfg.noise_sigma)), Json::object()});
    corpus.dialogues.push_back(std::move(d));
  }
  return corpus;
}

/// Planted s* of a synthetic turn or dialogue, if present.
inline std::optional<double> latent_satisfaction(const Json& extra) {
  auto it = extra.find(kLatentField);
  if (it == extra.end() || !it->is_number()) return std::nullopt;
  return it->get<double>();
}

}  // namespace usat
