#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gist/cli.hpp"
#include "gist/corpus.hpp"
#include "gist/evalkit.hpp"
#include "gist/rng.hpp"
#include "tempdir.hpp"

using namespace gist;
using testing_support::slurp;
using testing_support::spit;
using testing_support::TempDir;
using json = nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string err;
};

Outcome gist_run(std::vector<std::string> args) {
  testing::internal::CaptureStdout();
  testing::internal::CaptureStderr();
  const int code = cli::run(args);
  testing::internal::GetCapturedStdout();
  return {code, testing::internal::GetCapturedStderr()};
}

// A small synthetic corpus with the given extra settings.
std::filesystem::path synth(const TempDir& dir, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"synth", "--out-dir", (dir / "data").string(), "--set", "num_clusters=3",
                                "--set", "items_per_cluster=6", "--set", "sts_pairs=20"};
  args.insert(args.end(), extra.begin(), extra.end());
  EXPECT_EQ(gist_run(args).code, cli::kOk);
  return dir / "data";
}

std::vector<std::string> small_train(const std::filesystem::path& data, const std::filesystem::path& out,
                                     const std::string& strategy) {
  return {"train", "--data", (data / "triplets.jsonl").string(), "--strategy", strategy, "--out-dir",
          out.string(), "--steps", "10", "--set", "batch_size=4", "--set", "dim=8", "--set",
          "checkpoint_every=0", "--set", "learning_rate=1e-2"};
}

}  // namespace

TEST(Median, OddAndEven) {
  EXPECT_EQ(*cli::median({3, 1, 2}), 2.0);
  EXPECT_EQ(*cli::median({4, 1, 2, 3}), 2.5);
  EXPECT_FALSE(cli::median({}));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(gist_run({}).code, cli::kUsage);
  EXPECT_EQ(gist_run({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(gist_run({"synth", "--bogus"}).code, cli::kUsage);
  EXPECT_EQ(gist_run({"synth", "--help"}).code, cli::kOk);
  TempDir dir("cli_usage");
  const auto r = gist_run({"synth", "--out-dir", dir.path().string(), "--set", "no_such_key=1"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("no_such_key"), std::string::npos);
  spit(dir / "bad.conf", "no_such_key = 3\n");
  EXPECT_EQ(gist_run({"synth", "--config", (dir / "bad.conf").string()}).code, cli::kUsage);
}

TEST(Synth, WritesFilesDeterministically) {
  TempDir a("cli_synth_a"), b("cli_synth_b");
  synth(a);
  synth(b);
  EXPECT_FALSE(slurp(a / "data/triplets.jsonl").empty());
  for (const char* f : {"corpus.jsonl", "triplets.jsonl", "flags.jsonl", "suite/manifest.json"}) {
    EXPECT_EQ(slurp(a / "data" / f), slurp(b / "data" / f)) << f;
  }
  const auto run = json::parse(slurp(a / "data/run.json"));
  for (const char* key : {"command", "tool_version", "seed", "config", "inputs", "outputs", "started_at",
                          "finished_at"}) {
    EXPECT_TRUE(run.contains(key)) << key;
  }
  EXPECT_EQ(run["command"], "synth");
}

TEST(Synth, RateOutOfRangeNamesTheField) {
  TempDir dir("cli_synth_bad");
  const auto r = gist_run({"synth", "--out-dir", dir.path().string(), "--set", "false_negative_rate=1.5"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("false_negative_rate"), std::string::npos) << r.err;
}

TEST(Synth, ConfigFileAndReplay) {
  TempDir dir("cli_replay");
  spit(dir / "s.conf", "# planted corpus\n[synth]\nnum_clusters = 3\nitems_per_cluster = 5\nseed = 4\n");
  ASSERT_EQ(gist_run({"synth", "--config", (dir / "s.conf").string(), "--out-dir", (dir / "a").string()}).code,
            cli::kOk);
  // Replaying the manifest into a new directory reproduces the outputs.
  ASSERT_EQ(gist_run({"synth", "--config", (dir / "a/run.json").string(), "--out-dir", (dir / "b").string()}).code,
            cli::kOk);
  EXPECT_EQ(slurp(dir / "a/triplets.jsonl"), slurp(dir / "b/triplets.jsonl"));
  EXPECT_EQ(json::parse(slurp(dir / "b/run.json"))["config"]["items_per_cluster"], "5");
  // Flags win over the file.
  ASSERT_EQ(gist_run({"synth", "--config", (dir / "s.conf").string(), "--seed", "5", "--out-dir",
                      (dir / "c").string()}).code,
            cli::kOk);
  EXPECT_NE(slurp(dir / "a/triplets.jsonl"), slurp(dir / "c/triplets.jsonl"));
}

TEST(Mine, LabelInvariantsAndDeterminism) {
  TempDir dir("cli_mine");
  LabeledCorpus c;
  for (std::uint64_t i = 0; i < 12; ++i) {
    c.items.push_back({i, "text " + std::to_string(i) + (i % 2 ? " odd" : " even"), i % 2 ? "odd" : "even", ""});
  }
  save_corpus(c, dir / "c.jsonl");
  auto mine = [&](const std::string& out) {
    return gist_run({"mine", "--corpus", (dir / "c.jsonl").string(), "--out-dir", (dir / out).string(), "--set",
                     "k_p=100", "--set", "dim=8", "--seed", "3"})
        .code;
  };
  ASSERT_EQ(mine("a"), cli::kOk);
  ASSERT_EQ(mine("b"), cli::kOk);
  EXPECT_EQ(slurp(dir / "a/triplets.jsonl"), slurp(dir / "b/triplets.jsonl"));
  std::size_t lines = 0;
  std::istringstream ids(slurp(dir / "a/mined_ids.jsonl"));
  for (std::string line; std::getline(ids, line);) {
    const auto j = json::parse(line);
    const auto q = j["query_id"].get<std::uint64_t>(), p = j["pos_id"].get<std::uint64_t>(),
               n = j["neg_id"].get<std::uint64_t>();
    EXPECT_NE(q, p);
    EXPECT_EQ(q % 2, p % 2);
    EXPECT_NE(q % 2, n % 2);
    ++lines;
  }
  EXPECT_EQ(lines, 12u);
}

TEST(Mine, SingleClassIsDataError) {
  TempDir dir("cli_mine_bad");
  save_corpus(LabeledCorpus{{{1, "a", "x", ""}, {2, "b", "x", ""}}}, dir / "c.jsonl");
  EXPECT_EQ(gist_run({"mine", "--corpus", (dir / "c.jsonl").string(), "--out-dir", dir.path().string()}).code,
            cli::kData);
  EXPECT_EQ(gist_run({"mine", "--corpus", (dir / "missing.jsonl").string(), "--out-dir", dir.path().string()}).code,
            cli::kData);
}

TEST(Train, PairsOnly) {
  TempDir dir("cli_pairs");
  const auto data = synth(dir, {"--set", "with_negatives=false"});
  EXPECT_EQ(gist_run(small_train(data, dir / "fb", "fullbatch")).code, cli::kOk);
  EXPECT_TRUE(std::filesystem::exists(dir / "fb/checkpoints/final.ckpt"));
  auto guided = small_train(data, dir / "g", "guided");
  guided.insert(guided.end(), {"--guide", "oracle:" + (data / "corpus.jsonl").string()});
  EXPECT_EQ(gist_run(guided).code, cli::kOk);
  EXPECT_EQ(gist_run(small_train(data, dir / "a", "assigned")).code, cli::kUsage);
}

TEST(Train, GuidedWithoutGuideIsUsageError) {
  TempDir dir("cli_noguide");
  const auto data = synth(dir);
  const auto r = gist_run(small_train(data, dir / "g", "guided"));
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("guide"), std::string::npos);
}

TEST(Train, SmallRunIsQuickAndLogged) {
  TempDir dir("cli_train");
  const auto data = synth(dir);
  const auto t0 = std::chrono::steady_clock::now();
  ASSERT_EQ(gist_run(small_train(data, dir / "t", "fullbatch")).code, cli::kOk);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 10.0);
  std::istringstream log(slurp(dir / "t/train_log.jsonl"));
  std::size_t steps = 0;
  for (std::string line; std::getline(log, line);) {
    const auto j = json::parse(line);
    if (j.contains("step")) ++steps;
  }
  EXPECT_GE(steps, 10u);
  const auto csv = slurp(dir / "t/loss_curve.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
}

TEST(Train, ResumeNeedsOptimizerState) {
  TempDir dir("cli_resume");
  const auto data = synth(dir);
  auto args = small_train(data, dir / "t", "fullbatch");
  args.insert(args.end(), {"--resume", (dir / "missing.ckpt").string()});
  EXPECT_EQ(gist_run(args).code, cli::kData);
}

TEST(Eval, ReportSchemaAndMissingTask) {
  TempDir dir("cli_eval");
  const auto data = synth(dir);
  ASSERT_EQ(gist_run(small_train(data, dir / "t", "fullbatch")).code, cli::kOk);
  ASSERT_EQ(gist_run({"eval", "--checkpoint", (dir / "t/checkpoints/final.ckpt").string(), "--suite",
                      (data / "suite/manifest.json").string(), "--out-dir", (dir / "e").string()}).code,
            cli::kOk);
  const auto r = json::parse(slurp(dir / "e/eval_report.json"));
  ASSERT_EQ(r["tasks"].size(), 3u);
  for (const auto& t : r["tasks"]) {
    EXPECT_TRUE(t["value"].is_number());
    EXPECT_TRUE(t.contains("metric"));
  }

  spit(dir / "m.json", R"({"version":1,"tasks":[{"name":"t","kind":"sts","path":"gone.jsonl"}]})");
  const auto bad = gist_run({"eval", "--checkpoint", (dir / "t/checkpoints/final.ckpt").string(), "--suite",
                             (dir / "m.json").string(), "--out-dir", (dir / "e2").string()});
  EXPECT_EQ(bad.code, cli::kData);
  EXPECT_NE(bad.err.find("gone.jsonl"), std::string::npos) << bad.err;
}

// Labels drawn independently of the texts: an untrained encoder can only
// reach chance accuracy.
TEST(Eval, UntrainedModelNearChanceOnUnlearnableLabels) {
  TempDir dir("cli_chance");
  Rng rng(8);
  ClassificationTask task;
  auto text = [&] {
    std::string t;
    for (int k = 0; k < 6; ++k) t += "w" + std::to_string(rng.index(300)) + " ";
    return t;
  };
  for (int i = 0; i < 400; ++i) {
    task.train_texts.push_back(text());
    task.train_labels.push_back(rng.bernoulli(0.5) ? "a" : "b");
    task.test_texts.push_back(text());
    task.test_labels.push_back(rng.bernoulli(0.5) ? "a" : "b");
  }
  TaskSuite s;
  s.tasks.push_back({"noise", TaskKind::Classification, "noise.jsonl", task});
  save_suite(s, dir / "suite/manifest.json");
  const auto data = synth(dir);
  auto args = small_train(data, dir / "t", "fullbatch");
  ASSERT_EQ(args[7], "--steps");
  args[8] = "0";
  ASSERT_EQ(gist_run(args).code, cli::kOk);
  ASSERT_EQ(gist_run({"eval", "--checkpoint", (dir / "t/checkpoints/final.ckpt").string(), "--suite",
                      (dir / "suite/manifest.json").string(), "--out-dir", (dir / "e").string()}).code,
            cli::kOk);
  const double acc = json::parse(slurp(dir / "e/eval_report.json"))["tasks"][0]["value"].get<double>();
  EXPECT_NEAR(acc, 0.5, 4 * std::sqrt(0.25 / 400));
}

TEST(Compare, RowsSharedStartAndDelta) {
  TempDir dir("cli_compare");
  const auto r = gist_run({"compare", "--out-dir", dir.path().string(), "--steps", "8", "--set", "num_clusters=3",
                           "--set", "items_per_cluster=6", "--set", "batch_size=4", "--set", "dim=8", "--set",
                           "checkpoint_every=0", "--set", "sts_pairs=20", "--set", "false_negative_rate=0.3",
                           "--seeds", "0,1"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto j = json::parse(slurp(dir / "comparison.json"));
  ASSERT_EQ(j["strategies"].size(), 4u);
  const double step0 = j["strategies"][0]["step0_loss"].get<double>();
  for (const auto& row : j["strategies"]) {
    EXPECT_EQ(row["runs"], 2);
    EXPECT_EQ(row["step0_loss"].get<double>(), step0);
  }
  std::map<std::string, double> retrieval;
  for (const auto& row : j["strategies"]) {
    retrieval[row["strategy"]] = row["tasks"]["synthetic_retrieval"]["median"].get<double>();
  }
  for (const auto& [name, d] : j["guided_retrieval_delta"].items()) {
    const double want = retrieval["guided"] - retrieval[name];
    EXPECT_EQ(d["delta"].get<double>(), want);
    EXPECT_EQ(d["sign"], want > 0 ? "+" : (want < 0 ? "-" : "0"));
  }
  const auto csv = slurp(dir / "comparison.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_TRUE(std::filesystem::exists(dir / "curves/guided_seed1.csv"));
}
