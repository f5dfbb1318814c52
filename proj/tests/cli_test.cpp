#include <gtest/gtest.h>
#include <sys/wait.h>

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "httplib.h"
#include "usat/annotation_service.hpp"
#include "usat/io.hpp"
#include "usat/model_io.hpp"
#include "usat/pipeline.hpp"

using namespace usat;
using usat::testing::ScratchDir;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run run_cli(const ScratchDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string("'") + USAT_CLI + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  for (std::string cell; std::getline(s, cell, ',');) out.push_back(cell);
  return out;
}

// One small corpus, trained turn and dialogue models, shared by the tests.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new ScratchDir;
    const auto& d = *dir_;
    auto r = run_cli(d, "synth --seed 4 --n-dialogues 300 --new-app-fraction 0.1 --out '" + (d / "corpus").string() + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    r = run_cli(d, data("train-turn") + " --model-kind gbm --n-trees 30 --max-depth 3 --n-resamples 50" +
                       " --model-out '" + (d / "turn.json").string() + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    r = run_cli(d, data("train-dialogue") + " --model-kind gbm --n-trees 20 --n-resamples 50 --turn-model '" +
                       (d / "turn.json").string() + "' --model-out '" + (d / "dialogue.json").string() + "'");
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static std::string data(const std::string& sub) {
    const auto& d = *dir_;
    return sub + " --corpus '" + (d / "corpus/dialogues.jsonl").string() + "' --annotations '" +
           (d / "corpus/annotations.jsonl").string() + "' --ratings '" + (d / "corpus/ratings.jsonl").string() +
           "' --seed 12 --holdout-app new-app";
  }

  static Corpus corpus() {
    const auto& d = *dir_;
    Corpus c;
    c.dialogues = read_dialogues(d / "corpus/dialogues.jsonl").records;
    c.annotations = read_annotations(d / "corpus/annotations.jsonl").records;
    c.ratings = read_ratings(d / "corpus/ratings.jsonl").records;
    return c;
  }

  static PipelineConfig pipeline() {
    PipelineConfig pc;
    pc.seed = 12;
    pc.holdout_applications = {"new-app"};
    return pc;
  }

  static TrainedModel model(const char* name) {
    std::ifstream in(*dir_ / name);
    return load_model(in);
  }

  static ScratchDir* dir_;
};
ScratchDir* CliPipeline::dir_ = nullptr;

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  ScratchDir dir;
  EXPECT_EQ(run_cli(dir, "").code, 2);
  EXPECT_EQ(run_cli(dir, "frobnicate").code, 2);
  EXPECT_EQ(run_cli(dir, "synth --out x").code, 2);  // missing --seed
  EXPECT_EQ(run_cli(dir, "synth --seed 1 --out '" + (dir / "c").string() + "' --min-turns 3 --max-turns 2").code, 2);
  EXPECT_EQ(run_cli(dir, "--help").code, 0);
}

TEST(Cli, BadDataExitsOne) {
  ScratchDir dir;
  {
    std::ofstream out(dir / "junk.jsonl");
    out << "not json\n{\"dialogue_id\": 3}\n";
  }
  const auto r = run_cli(dir, "featurize --corpus '" + (dir / "junk.jsonl").string() + "' --seed 1 --out '" +
                                  (dir / "f").string() + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 1"), std::string::npos);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

TEST(Cli, SynthIsDeterministicBySeed) {
  ScratchDir dir;
  for (const char* sub : {"a", "b"})
    ASSERT_EQ(run_cli(dir, "synth --seed 21 --n-dialogues 40 --out '" + (dir / sub).string() + "'").code, 0);
  ASSERT_EQ(run_cli(dir, "synth --seed 22 --n-dialogues 40 --out '" + (dir / "c").string() + "'").code, 0);
  for (const char* file : {"dialogues.jsonl", "annotations.jsonl", "ratings.jsonl"}) {
    EXPECT_FALSE(slurp(dir / "a" / file).empty());
    EXPECT_EQ(slurp(dir / "a" / file), slurp(dir / "b" / file)) << file;
  }
  EXPECT_NE(slurp(dir / "a/dialogues.jsonl"), slurp(dir / "c/dialogues.jsonl"));
}

TEST_F(CliPipeline, FeaturizeWritesSchemaHeaders) {
  ScratchDir out;
  const auto r = run_cli(out, data("featurize") + " --level both --turn-model '" + (*dir_ / "turn.json").string() +
                                  "' --out '" + out.path().string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  std::string expected = "dialogue_id,turn_index";
  for (const auto& n : turn_schema().names()) expected += "," + n;
  EXPECT_EQ(lines_of(slurp(out / "turn_train.csv")).at(0), expected + ",target");
  std::string dexpected = "dialogue_id";
  const auto dschema = dialogue_schema(true);
  for (const auto& n : dschema.names()) dexpected += "," + n;
  EXPECT_EQ(lines_of(slurp(out / "dialogue_test.csv")).at(0), dexpected + ",rating");

  // Row count equals the in-process training matrix.
  const auto ds = prepare_turn_datasets(corpus(), default_lexicon(), pipeline());
  EXPECT_EQ(lines_of(slurp(out / "turn_train.csv")).size(), ds.train.rows() + 1);
  EXPECT_EQ(PopularityTable::from_json(Json::parse(slurp(out / "popularity.json"))).to_json(), ds.table.to_json());
}

TEST_F(CliPipeline, EvalPredictionsMatchTheLoadedModel) {
  ScratchDir out;
  const auto r = run_cli(out, data("eval") + " --n-resamples 50 --model-in '" + (*dir_ / "turn.json").string() +
                                  "' --predictions '" + (out / "pred.csv").string() + "' --out '" +
                                  (out / "report.json").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = model("turn.json");
  const auto ds = prepare_turn_datasets(corpus(), default_lexicon(), pipeline());
  const auto pred = m.predict(ds.test);
  const auto rows = lines_of(slurp(out / "pred.csv"));
  ASSERT_EQ(rows.size(), ds.test.rows() + 1);
  EXPECT_EQ(rows[0], "dialogue_id,turn_index,target,prediction");
  for (std::size_t i = 0; i < ds.test.rows(); ++i) {
    const auto cells = split_csv(rows[i + 1]);
    ASSERT_EQ(cells.size(), 4u);
    EXPECT_EQ(cells[0], ds.test.keys[i].dialogue_id);
    EXPECT_EQ(std::stoi(cells[1]), ds.test.keys[i].turn_index);
    EXPECT_EQ(std::strtod(cells[3].c_str(), nullptr), pred[i]);
  }
  const auto report = Json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report["level"], "turn");
  EXPECT_EQ(report["partitions"].size(), 3u);
  EXPECT_EQ(report["partitions"][2]["partition"], "held-out application");
  EXPECT_FALSE(lines_of(slurp(out / "report.csv")).empty());
}

TEST_F(CliPipeline, ServicePredictionsMatchCliEval) {
  ScratchDir out;
  ASSERT_EQ(run_cli(out, data("eval") + " --n-resamples 20 --model-in '" + (*dir_ / "dialogue.json").string() +
                             "' --turn-model '" + (*dir_ / "turn.json").string() + "' --predictions '" +
                             (out / "pred.csv").string() + "'")
                .code,
            0);
  const Corpus c = corpus();
  const auto ds = prepare_turn_datasets(c, default_lexicon(), pipeline());
  AnnotationService svc(c.dialogues, out / "log.jsonl", {}, ds.table);
  svc.register_model("turn", model("turn.json"), ModelLevel::turn);
  svc.register_model("dialogue", model("dialogue.json"), ModelLevel::dialogue);
  std::map<std::string, const Dialogue*> by_id;
  for (const auto& d : c.dialogues) by_id[d.dialogue_id] = &d;
  const auto rows = lines_of(slurp(out / "pred.csv"));
  ASSERT_GT(rows.size(), 10u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto cells = split_csv(rows[i]);
    const auto res = svc.predict({{"dialogue", to_json(*by_id.at(cells[0]))},
                                  {"turn_model", "turn"},
                                  {"dialogue_model", "dialogue"}});
    EXPECT_EQ(res["dialogue_rating"].get<double>(), std::strtod(cells[3].c_str(), nullptr)) << cells[0];
  }
}

TEST_F(CliPipeline, DialogueModelWithoutTurnModelIsAConfigError) {
  ScratchDir out;
  const auto r = run_cli(out, data("eval") + " --model-in '" + (*dir_ / "dialogue.json").string() + "'");
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliPipeline, AblateIaaAndReportWriteTheirOutputs) {
  ScratchDir out;
  auto r = run_cli(out, data("ablate") + " --n-trees 10 --n-resamples 20 --out '" + (out / "ablate.json").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ablation = Json::parse(slurp(out / "ablate.json"));
  EXPECT_EQ(ablation["rows"][0]["removed"], "none");
  EXPECT_EQ(ablation["rows"].size(), 1 + turn_schema().sets().size() - 1);
  EXPECT_EQ(lines_of(slurp(out / "ablate.csv")).at(0), "removed,partition,n,metric,point,ci_low,ci_high,valid");

  r = run_cli(out, "iaa --annotations '" + (*dir_ / "corpus/annotations.jsonl").string() + "' --ratings '" +
                       (*dir_ / "corpus/ratings.jsonl").string() + "' --out '" + (out / "iaa.json").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto iaa = Json::parse(slurp(out / "iaa.json"));
  EXPECT_EQ(iaa["turn_rq"]["pairs"].size(), 3u);
  EXPECT_GT(iaa["turn_rq"]["mean"].get<double>(), 0.3);
  EXPECT_GT(iaa["rq_vs_user_rating"]["n_items"].get<int>(), 0);

  r = run_cli(out, data("report") + " --out '" + (out / "hist.csv").string() + "'");
  // report has no --seed; make sure stray options are rejected rather than ignored.
  EXPECT_EQ(r.code, 2);
  r = run_cli(out, "report --corpus '" + (*dir_ / "corpus/dialogues.jsonl").string() + "' --annotations '" +
                       (*dir_ / "corpus/annotations.jsonl").string() + "' --holdout-app new-app --out '" +
                       (out / "hist.csv").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto hist = lines_of(slurp(out / "hist.csv"));
  EXPECT_EQ(hist.at(0), "level,partition,rating,count");
  EXPECT_EQ(hist.size(), 1u + 3 * 5);
}

TEST_F(CliPipeline, ServeAnswersOverHttp) {
  ScratchDir out;
  const std::string cmd = std::string("'") + USAT_CLI + "' " + data("serve") + " --port 0 --log '" +
                          (out / "log.jsonl").string() + "' --turn-model '" + (*dir_ / "turn.json").string() +
                          "' --dialogue-model '" + (*dir_ / "dialogue.json").string() + "' >'" +
                          (out / "serve.txt").string() + "' 2>&1 & echo $! >'" + (out / "pid").string() + "'";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  int port = 0;
  for (int i = 0; i < 200 && port == 0; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    const auto text = slurp(out / "serve.txt");
    const auto at = text.find("listening on http://127.0.0.1:");
    if (at != std::string::npos) port = std::atoi(text.c_str() + at + 30);
  }
  const pid_t pid = std::atoi(slurp(out / "pid").c_str());
  ASSERT_GT(port, 0) << slurp(out / "serve.txt");

  httplib::Client cli("127.0.0.1", port);
  const Corpus c = corpus();
  const auto ds = prepare_turn_datasets(c, default_lexicon(), pipeline());
  const auto turn = model("turn.json");
  const Json body = {{"dialogue", to_json(c.dialogues[3])}};
  auto res = cli.Post("/api/predict", body.dump(), "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto j = Json::parse(res->body);
  for (std::size_t n = 0; n < c.dialogues[3].turns.size(); ++n)
    EXPECT_EQ(j["turn_ratings"][n].get<double>(),
              turn.predict(featurize_turn(c.dialogues[3], n, ds.table, default_lexicon()).values));
  EXPECT_TRUE(j.contains("dialogue_rating"));
  EXPECT_EQ(cli.Get("/api/tasks/next?annotator=z")->status, 200);

  kill(pid, SIGTERM);
  int waited = 0;
  while (kill(pid, 0) == 0 && waited++ < 100) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  EXPECT_NE(kill(pid, 0), 0);
}
