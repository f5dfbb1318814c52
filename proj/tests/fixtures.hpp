#pragma once

// Small hand-built dialogues and a scratch directory shared by the tests.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "usat/corpus.hpp"

namespace usat::testing {

inline Turn make_turn(int index, std::string user, std::string system, std::string intent, std::string domain,
                      double timestamp, double asr = 0.9, double nlu = 0.8, bool barge_in = false) {
  Turn t;
  t.turn_index = index;
  t.user_utterance = std::move(user);
  t.system_response = std::move(system);
  t.asr_confidence = asr;
  t.nlu_confidence = nlu;
  t.intent = std::move(intent);
  t.domain = std::move(domain);
  t.user_timestamp = timestamp;
  t.barge_in = barge_in;
  return t;
}

inline Dialogue make_dialogue(std::string id, std::vector<Turn> turns, std::string customer = "c1",
                              std::string application = "Music", bool multi_turn = false) {
  Dialogue d;
  d.dialogue_id = std::move(id);
  d.customer_id = std::move(customer);
  d.cohort = Cohort::novice;
  d.application = std::move(application);
  d.multi_turn = multi_turn;
  d.turns = std::move(turns);
  return d;
}

/// Three turns: music, music again, then a calendar request that fails.
inline Dialogue three_turn_fixture() {
  return make_dialogue(
      "d-fixture",
      {make_turn(0, "Play latest hits.", "Playing latest hits.", "PlayMusic", "Music", 2.0, 0.9, 0.8, false),
       make_turn(1, "Play latest hits please", "Shuffling from your playlist?", "PlayMusic", "Music", 9.5, 0.6,
                 0.7, true),
       make_turn(2, "cancel my 7pm event if it is raining today", "Sorry, I don't know that one.", "CancelEvent",
                 "Calendar", 20.0, 0.9, 0.5, false)},
      "c1", "Music", true);
}

class ScratchDir {
 public:
  ScratchDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("usat-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace usat::testing
