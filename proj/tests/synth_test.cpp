#include <gtest/gtest.h>

#include <sstream>

#include "usat/iaa.hpp"
#include "usat/synth.hpp"

using namespace usat;

namespace {
std::string serialize(const Corpus& c) {
  std::ostringstream out;
  write_lines<Dialogue>(out, c.dialogues);
  write_lines<TurnAnnotation>(out, c.annotations);
  write_lines<DialogueRating>(out, c.ratings);
  return out.str();
}

SynthConfig small() {
  SynthConfig cfg;
  cfg.n_dialogues = 200;
  cfg.new_application_fraction = 0.1;
  return cfg;
}
}  // namespace

TEST(Synth, SameSeedIsByteIdentical) {
  EXPECT_EQ(serialize(synthesize_corpus(small(), 5)), serialize(synthesize_corpus(small(), 5)));
  EXPECT_NE(serialize(synthesize_corpus(small(), 5)), serialize(synthesize_corpus(small(), 6)));
}

TEST(Synth, OutputParsesCleanly) {
  const auto c = synthesize_corpus(small(), 1);
  std::ostringstream dl, al;
  write_lines<Dialogue>(dl, c.dialogues);
  write_lines<TurnAnnotation>(al, c.annotations);
  std::istringstream di(dl.str()), ai(al.str());
  const auto pd = parse_dialogues(di);
  const auto pa = parse_annotations(ai);
  EXPECT_TRUE(pd.diagnostics.empty());
  EXPECT_TRUE(pa.diagnostics.empty());
  EXPECT_EQ(pd.records, c.dialogues);
  EXPECT_EQ(pa.records, c.annotations);
  EXPECT_TRUE(validate_annotations(c.dialogues, c.annotations).empty());
}

TEST(Synth, ShapeFollowsConfig) {
  auto cfg = small();
  cfg.n_annotators = 4;
  cfg.min_turns = 2;
  cfg.max_turns = 3;
  const auto c = synthesize_corpus(cfg, 2);
  ASSERT_EQ(c.dialogues.size(), 200u);
  EXPECT_EQ(c.ratings.size(), 200u);
  EXPECT_EQ(c.annotations.size(), 4 * c.turn_count());
  std::size_t new_app = 0;
  for (const auto& d : c.dialogues) {
    EXPECT_GE(d.turns.size(), 2u);
    EXPECT_LE(d.turns.size(), 3u);
    if (d.application == kNewApplication) {
      ++new_app;
      EXPECT_TRUE(d.multi_turn);
      for (const auto& t : d.turns) EXPECT_EQ(t.domain, "NewApp");
    }
    for (const auto& t : d.turns) {
      const auto s = latent_satisfaction(t.extra);
      ASSERT_TRUE(s.has_value());
      EXPECT_GE(*s, 1.0);
      EXPECT_LE(*s, 5.0);
    }
  }
  EXPECT_GT(new_app, 5u);
  EXPECT_LT(new_app, 40u);
}

TEST(Synth, ZeroNoiseAnnotatorsAgreeExactly) {
  auto cfg = small();
  cfg.noise_sigma = 0.0;
  const auto c = synthesize_corpus(cfg, 3);
  const auto targets = build_turn_targets(c.annotations);
  for (const auto& a : c.annotations) EXPECT_EQ(targets.at({a.dialogue_id, a.turn_index}), a.rq_rating);
  const auto report = iaa_spearman(c.annotations);
  EXPECT_EQ(report.pairs.size(), 3u);
  EXPECT_DOUBLE_EQ(report.mean, 1.0);
}

TEST(Synth, PlantedFunction) {
  const PlantedSignal s;
  EXPECT_DOUBLE_EQ(s(0.9, false, false, 0.7), 4.7);
  EXPECT_DOUBLE_EQ(s(0.9, false, false, 0.2), 3.9);
  EXPECT_DOUBLE_EQ(s(0.7, false, false, 0.2), 3.9 - 0.8);
  EXPECT_DOUBLE_EQ(s(0.9, true, true, 0.2), 1.0);  // 0.9 clamps to the floor
  EXPECT_DOUBLE_EQ(s(0.1, false, false, 0.9), 1.0);
}

TEST(Synth, InvalidConfigIsRejected) {
  SynthConfig cfg;
  cfg.n_dialogues = 0;
  EXPECT_THROW(synthesize_corpus(cfg, 1), ConfigError);
  cfg = SynthConfig{};
  cfg.noise_sigma = -1;
  EXPECT_THROW(synthesize_corpus(cfg, 1), ConfigError);
  cfg = SynthConfig{};
  cfg.max_turns = 0;
  EXPECT_THROW(synthesize_corpus(cfg, 1), ConfigError);
}
