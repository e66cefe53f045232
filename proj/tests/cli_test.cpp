#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "topseg/error.hpp"

namespace topseg::cli {
namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("topseg_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Small corpus plus a tiny model configuration shared by the tests.
  void make_corpus(int docs = 24) {
    ASSERT_EQ(run({"synth", "--seed", "5", "--out", path("c.jsonl"), "--split",
                   "--set", "synth.num_docs=" + std::to_string(docs), "synth.vocab_size=40",
                   "synth.num_topics=4", "synth.tokens_per_sentence=2,4",
                   "synth.segments_per_doc=2,3", "synth.sentences_per_segment=2,4"}),
              0)
        << err_.str();
  }

  std::vector<std::string> tiny_model() const {
    return {"--set", "model.embed_dim=4", "model.hidden_dim=4", "gat.dim=8", "gat.num_heads=2",
            "model.predictor_hidden=8", "train.max_epochs=2", "train.lr=0.01"};
  }

  std::vector<std::string> train_args(const std::string& variant, const std::string& ckpt) {
    std::vector<std::string> a{"train", "--variant", variant, "--seed", "3",
                               "--train", path("c.train.jsonl"), "--dev", path("c.dev.jsonl"),
                               "--out", path(ckpt)};
    const auto m = tiny_model();
    a.insert(a.end(), m.begin(), m.end());
    return a;
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, SynthPrintsStatsAndReloads) {
  ASSERT_EQ(run({"synth", "--seed", "9", "--out", path("s.jsonl"), "--set",
                 "synth.num_docs=5", "synth.segments_per_doc=3",
                 "synth.sentences_per_segment=4"}),
            0);
  const std::string text = out_.str();
  EXPECT_NE(text.find("seed 9"), std::string::npos);
  EXPECT_NE(text.find("# of doc"), std::string::npos);
  EXPECT_NE(text.find("# sent/seg"), std::string::npos);
  EXPECT_NE(text.find("# seg/doc"), std::string::npos);
  EXPECT_NE(text.find("4.0"), std::string::npos) << text;
  EXPECT_NE(text.find("3.0"), std::string::npos) << text;
  const Corpus c = load_jsonl(path("s.jsonl"));
  EXPECT_EQ(c.size(), 5u);
  const auto stats = corpus_stats(c);
  EXPECT_EQ(stats.sentences_per_segment, 4.0);
  EXPECT_EQ(stats.segments_per_doc, 3.0);
}

TEST_F(CliTest, CreatesOutputDirectories) {
  ASSERT_EQ(run({"synth", "--seed", "1", "--out", path("a/b/c.jsonl"), "--split",
                 "--set", "synth.num_docs=10"}),
            0)
      << err_.str();
  EXPECT_TRUE(fs::exists(path("a/b/c.train.jsonl")));
  EXPECT_TRUE(fs::exists(path("a/b/c.jsonl.run.json")));
}

TEST_F(CliTest, RunConfigEchoReproducesOutput) {
  ASSERT_EQ(run({"synth", "--seed", "4", "--out", path("a.jsonl"), "--set", "synth.num_docs=6"}), 0);
  std::ifstream echo(path("a.jsonl") + ".run.json");
  const auto j = nlohmann::json::parse(echo);
  EXPECT_EQ(j.at("seed"), 4);
  EXPECT_EQ(j.at("command"), "synth");
  ASSERT_EQ(run({"synth", "--config", path("a.jsonl") + ".run.json", "--out", path("b.jsonl")}), 0);
  EXPECT_EQ(sha256_file(path("a.jsonl")), sha256_file(path("b.jsonl")));
}

TEST_F(CliTest, ConfigPrecedence) {
  std::ofstream(path("cfg.json")) << R"({"seed": 11, "synth.num_docs": 3})";
  ASSERT_EQ(run({"synth", "--config", path("cfg.json"), "--out", path("p.jsonl")}), 0);
  EXPECT_NE(out_.str().find("seed 11"), std::string::npos);
  ASSERT_EQ(run({"synth", "--config", path("cfg.json"), "--seed", "12", "--set",
                 "synth.num_docs=4", "--out", path("q.jsonl")}),
            0);
  EXPECT_NE(out_.str().find("seed 12"), std::string::npos);
  EXPECT_EQ(load_jsonl(path("q.jsonl")).size(), 4u);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"frobnicate"}), 1);
  EXPECT_EQ(run({"synth", "--out", path("x.jsonl"), "--set", "no.such.key=1"}), 1);
  EXPECT_NE(err_.str().find("unknown setting"), std::string::npos);
  EXPECT_EQ(run({"synth", "--out", path("x.jsonl"), "--set", "synth.num_docs=abc"}), 1);
  EXPECT_EQ(run({"synth"}), 1);
  EXPECT_EQ(run({"eval", "--data", path("missing.jsonl"), "--hyp", path("h.jsonl")}), 1);
  std::ofstream(path("bad.ckpt")) << "not a checkpoint";
  std::ofstream(path("d.jsonl")) << R"({"id":"d","sentences":[["a"],["b"]],"labels":[0,1]})" "\n";
  EXPECT_EQ(run({"eval", "--data", path("d.jsonl"), "--model", path("bad.ckpt")}), 2);
  EXPECT_EQ(run({"synth", "--help"}), 0);
}

TEST_F(CliTest, EvalPerfectHypothesisScoresZero) {
  make_corpus(8);
  std::ofstream hyp(path("hyp.jsonl"));
  for (const auto& d : load_jsonl(path("c.test.jsonl")).documents) {
    hyp << nlohmann::json{{"id", d.id}, {"labels", d.labels}}.dump() << '\n';
  }
  hyp.close();
  ASSERT_EQ(run({"eval", "--seed", "2", "--data", path("c.test.jsonl"), "--hyp", path("hyp.jsonl"),
                 "--out", path("r.json")}),
            0)
      << err_.str();
  const auto j = nlohmann::json::parse(out_.str());
  EXPECT_EQ(j.at("pk"), 0.0);
  EXPECT_EQ(j.at("seed"), 2);
  EXPECT_TRUE(j.contains("tau"));
  std::ifstream written(path("r.json"));
  EXPECT_EQ(nlohmann::json::parse(written), j);
}

TEST_F(CliTest, TrainIsDeterministicAndEvalMatchesLibrary) {
  make_corpus();
  ASSERT_EQ(run(train_args("discourse", "m1.ckpt")), 0) << err_.str();
  const std::string first = out_.str();
  EXPECT_NE(first.find("seed 3"), std::string::npos);
  EXPECT_NE(first.find("dev_pk"), std::string::npos);
  ASSERT_EQ(run(train_args("discourse", "m2.ckpt")), 0);
  EXPECT_EQ(sha256_file(path("m1.ckpt")), sha256_file(path("m2.ckpt")));

  ASSERT_EQ(run({"eval", "--data", path("c.test.jsonl"), "--model", path("m1.ckpt")}), 0)
      << err_.str();
  const auto j = nlohmann::json::parse(out_.str());
  EXPECT_TRUE(j.at("tau").is_number());

  const SegmenterModel model = load_checkpoint(path("m1.ckpt"));
  Corpus test = load_jsonl(path("c.test.jsonl"));
  const auto docs = model.prepare(test, {});
  const EvalReport lib = evaluate(model, "c.test", docs);
  EXPECT_EQ(j.at("pk").get<double>(), lib.pk);
  EXPECT_EQ(j.at("n_docs").get<std::size_t>(), lib.n_docs);
}

TEST_F(CliTest, BothVariantsTrainOnSameCorpus) {
  make_corpus();
  ASSERT_EQ(run(train_args("basic", "b.ckpt")), 0) << err_.str();
  EXPECT_EQ(load_checkpoint(path("b.ckpt")).variant(), Variant::basic);
  ASSERT_EQ(run(train_args("discourse", "d.ckpt")), 0) << err_.str();
  EXPECT_EQ(load_checkpoint(path("d.ckpt")).variant(), Variant::discourse);
}

TEST_F(CliTest, MissingEdgesWarnAndFallBack) {
  make_corpus();
  for (const char* part : {"train", "dev"}) {
    Corpus c = load_jsonl(path(std::string("c.") + part + ".jsonl"));
    for (auto& d : c.documents) {
      d.edges.clear();
      d.has_edges = false;
    }
    save_jsonl(c, path(std::string("c.") + part + ".jsonl"));
  }
  ASSERT_EQ(run(train_args("discourse", "m.ckpt")), 0) << err_.str();
  EXPECT_NE(err_.str().find("self-loop"), std::string::npos);
  ASSERT_EQ(run(train_args("basic", "n.ckpt")), 0);
  EXPECT_EQ(err_.str().find("self-loop"), std::string::npos);
}

TEST_F(CliTest, TransferLeavesCheckpointUnchanged) {
  make_corpus();
  ASSERT_EQ(run(train_args("discourse", "m.ckpt")), 0) << err_.str();
  const std::string before = sha256_file(path("m.ckpt"));
  // A target whose tokens are all outside the training vocabulary.
  std::ofstream(path("oov.jsonl"))
      << R"({"id":"o","sentences":[["zz1","zz2"],["zz3"],["zz4"],["zz5"]],"labels":[0,1,0,1]})" "\n";
  ASSERT_EQ(run({"transfer", "--model", path("m.ckpt"), "--target", path("c.test.jsonl"),
                 "--target", path("oov.jsonl"), "--out", path("t.json")}),
            0)
      << err_.str();
  std::istringstream lines(out_.str());
  std::string line;
  int reports = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("checkpoint_sha256"), before);
    ++reports;
  }
  EXPECT_EQ(reports, 2);
  EXPECT_EQ(sha256_file(path("m.ckpt")), before);
}

TEST_F(CliTest, BenchJsonAgreesWithTable) {
  ASSERT_EQ(run({"bench", "--seed", "1", "--out", path("b.json"), "--set", "synth.num_docs=4",
                 "synth.vocab_size=30", "synth.num_topics=3", "model.embed_dim=4",
                 "model.hidden_dim=4", "gat.dim=8", "model.predictor_hidden=8", "bench.reps=3",
                 "bench.warmup=0"}),
            0)
      << err_.str();
  const std::string printed = out_.str();
  EXPECT_NE(printed.find("# Params"), std::string::npos);
  EXPECT_NE(printed.find("T-Speed"), std::string::npos);
  EXPECT_NE(printed.find("I-Speed"), std::string::npos);
  std::ifstream in(path("b.json"));
  const auto j = nlohmann::json::parse(in);
  std::vector<BenchReport> reports;
  for (const auto& r : j.at("reports")) reports.push_back(bench_report_from_json(r.dump()));
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_NE(printed.find(format_bench_table(reports)), std::string::npos);
  EXPECT_GT(reports[1].param_count, reports[0].param_count);
  EXPECT_TRUE(j.contains("overhead"));
  EXPECT_EQ(j.at("seed"), 1);
}

TEST(RunConfig, EchoCoversEveryKey) {
  RunConfig cfg;
  cfg.command = "train";
  const auto j = run_config_json(cfg);
  for (const auto& key : setting_keys()) EXPECT_TRUE(j.contains(key)) << key;
  RunConfig copy;
  copy.command = "train";
  for (const auto& [key, value] : j.items()) {
    if (key == "command") continue;
    std::string text;
    if (value.is_string()) text = value.get<std::string>();
    else if (value.is_null()) text = "";
    else if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i)
        text += (i ? "," : "") + (value[i].is_string() ? value[i].get<std::string>() : value[i].dump());
    } else text = value.dump();
    apply_setting(copy, key, text);
  }
  EXPECT_EQ(run_config_json(copy), j);
}

}  // namespace
}  // namespace topseg::cli
